#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qlp {

enum class ErrorKind {
    InvalidArgument,  // bad shapes, bad grid parameters, violated preconditions
    Parse,            // spec mini-language / symbol file problems
    Stencil,          // grid too small for a finite-difference stencil
    DomainEscape,     // characteristic left the region where data is defined
    Growth,           // coefficient fails the sampled linear-growth check
    MiuraGate,        // r0 is not on the Miura fiber of q(t0)
    Numerical,        // step failure, non-finite values
    Obstruction,      // no formal asymptotic solution exists
    Consistency,      // internal cross-check failed
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// A backward or forward characteristic left the sampled domain.
class DomainEscapeError : public Error {
public:
    struct Node {
        int time_index;
        int space_index;
        double exit_time;
    };

    DomainEscapeError(const std::string& what, std::vector<Node> nodes)
        : Error(ErrorKind::DomainEscape, what), nodes_(std::move(nodes)) {}

    const std::vector<Node>& nodes() const noexcept { return nodes_; }

private:
    std::vector<Node> nodes_;
};

}  // namespace qlp
