#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qlpair/field.hpp"

namespace qlp {

/// Exact rational number with a positive, reduced denominator.
class Rational {
public:
    constexpr Rational() = default;
    Rational(std::int64_t num, std::int64_t den = 1);

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }
    bool is_zero() const { return num_ == 0; }

    friend Rational operator+(Rational a, Rational b);
    friend Rational operator-(Rational a, Rational b);
    friend Rational operator*(Rational a, Rational b);
    friend Rational operator/(Rational a, Rational b);
    Rational operator-() const { return Rational(-num_, den_); }

    friend bool operator==(Rational a, Rational b) { return a.num_ == b.num_ && a.den_ == b.den_; }
    friend std::strong_ordering operator<=>(Rational a, Rational b);

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

/// Accepts "p/q", integers and finite decimals ("0.6" is 3/5 exactly).
Rational parse_rational(const std::string& text);
std::string to_string(Rational r);
nlohmann::json to_json(Rational r);
Rational rational_from_json(const nlohmann::json& j);

inline const Rational kDefaultFloor{-6};

/// Finite, strictly decreasing set of exponents, all >= floor.
class ExponentSet {
public:
    explicit ExponentSet(Rational floor = kDefaultFloor);
    ExponentSet(std::vector<Rational> elements, Rational floor = kDefaultFloor);

    /// Inserts unless below the floor; returns true if newly added.
    bool insert(Rational e);
    bool contains(Rational e) const;
    const std::vector<Rational>& elements() const { return elements_; }
    Rational floor() const { return floor_; }
    bool empty() const { return elements_.empty(); }
    std::size_t size() const { return elements_.size(); }
    Rational max() const;
    /// Position of e in the descending list, if present.
    std::optional<std::size_t> index_of(Rational e) const;

    friend bool operator==(const ExponentSet& a, const ExponentSet& b) {
        return a.floor_ == b.floor_ && a.elements_ == b.elements_;
    }

private:
    std::vector<Rational> elements_;
    Rational floor_;
};

/// Smallest superset closed under (d1, d2) -> d1 + d2 - 1 and d -> d - 1,
/// truncated at the floor. Requires max < 1.
ExponentSet closure_delta(const ExponentSet& delta);

/// {b + d} u closure u {b + 1} for b in `b_set`, d in `closure`, truncated at
/// the floor of `closure`. Requires max b_set < 1/2 and a closed `closure`.
/// Checks the lattice properties and throws ErrorKind::Consistency on
/// failure.
ExponentSet build_barB(const ExponentSet& b_set, const ExponentSet& closure);

enum class Side { Plus, Minus };

/// Coefficient of one power: scale * coeff, with coeff constant (one value)
/// or sampled on the owning symbol's time axis. Differentiation and
/// integration only touch the exact scale.
struct SymbolTerm {
    Rational exponent;
    std::vector<double> coeff;
    Rational scale{1};

    double at(std::size_t sample) const { return scale.value() * coeff[sample]; }
    /// Folds the scale into the samples.
    std::vector<double> values() const;
};

/// Formal series sum_k a_k(t) (+-x)^{e_k} with strictly decreasing
/// exponents, truncated at `floor`.
struct Symbol {
    Side side = Side::Plus;
    Rational floor = kDefaultFloor;
    std::optional<Axis> times;
    std::vector<SymbolTerm> terms;

    /// Sorts, merges equal exponents and drops terms below the floor.
    void normalize();
    int samples() const { return times ? times->size : 1; }
    /// Largest exponent with a nonzero coefficient.
    std::optional<Rational> leading() const;
    double coeff(std::size_t k, double t) const;
    ExponentSet exponents() const;
};

/// Antiderivative-class series: power terms plus a log term and a constant.
struct StarSymbol {
    Symbol powers;
    std::vector<double> log_coeff;    // same sampling as the powers
    std::vector<double> const_coeff;

    double log_at(double t) const;
    double const_at(double t) const;
};

Symbol make_symbol(Side side, std::vector<std::pair<Rational, double>> terms, Rational floor = kDefaultFloor);

/// d/dx term by term; the floor moves down by one (up for integration).
Symbol derivative(const Symbol& s);
Symbol derivative(const StarSymbol& s);
Symbol product(const Symbol& a, const Symbol& b);
Symbol sum(const Symbol& a, const Symbol& b);

/// Symbol of r_x + r^2. Throws ErrorKind::Obstruction when the leading
/// exponent is not below 1/2.
Symbol miura_symbol(const Symbol& r);

/// Term-wise antiderivative; the x^-1 term becomes the log coefficient and
/// the constant slot is zero.
StarSymbol integrate_symbol(const Symbol& f);

struct GateResult {
    bool pass = false;
    std::optional<Rational> beta;
    Rational witness;  // 3 beta, the leading exponent of 2 q p_x
    Rational bound;    // beta + 1
    std::string message;
};

/// Admits leading exponents below 1/2, or exactly 1/2 when `o_class`.
GateResult beta_gate(const Symbol& r0, bool o_class = false);

/// Linear triangular system for the coefficients of the formal solution.
/// Row k belongs to exponents[k]; its right side is
///   sum over `linear` of factor * c_i(t) * a_n(t)
/// + sum over `forcing` of factor * c_i(t) * (log coefficient if with_log else 1).
struct EvolutionSystem {
    struct Linear {
        std::size_t source;  // index of a_n
        std::size_t q_term;  // index into q's terms
        Rational factor;
    };
    struct Forcing {
        std::size_t q_term;
        Rational factor;
        bool with_log;
    };
    struct Row {
        std::vector<Linear> linear;
        std::vector<Forcing> forcing;
    };

    ExponentSet exponents;       // B-bar, one row each
    std::vector<Row> rows;
    bool log_row_empty = true;   // no term of the right side is a log
    ExponentSet q_exponents;     // closure of q's exponents
    std::size_t dropped = 0;     // products below the floor

    bool strictly_lower_triangular() const;
};

/// Matches 2 q chi_x - q_x against chi_t exponent by exponent. Throws
/// ErrorKind::Obstruction when a product exceeds the leading row.
EvolutionSystem assemble_evolution(const StarSymbol& p0, const Symbol& q);

/// Integrates the system by RK4 over `times`, starting from p0. q's
/// coefficients are interpolated in time when sampled. The constant slot
/// stays at its initial value.
StarSymbol formal_evolution(const StarSymbol& p0, const Symbol& q, const Axis& times);

/// Formal KdV flow q_t = 6 q q_x - q_xxx of a symbol on the closure of its
/// exponents (a triangular, nonlinear system), integrated by RK4.
Symbol kdv_symbol_flow(const Symbol& q0, const Axis& times);

/// Partial sum of the first n_terms powers (all when negative) plus log and
/// constant. Requires |x| >= 1 on the symbol's side.
double symbol_eval(const Symbol& s, double t, double x, int n_terms = -1);
double symbol_eval(const StarSymbol& s, double t, double x, int n_terms = -1);

nlohmann::json to_json(const Symbol& s);
nlohmann::json to_json(const StarSymbol& s);
/// Reads either form; power-only input gets zero log and constant.
StarSymbol star_symbol_from_json(const nlohmann::json& j);
Symbol symbol_from_json(const nlohmann::json& j);

}  // namespace qlp
