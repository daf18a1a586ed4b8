#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qlpair/miura.hpp"

namespace qlp::checks {

struct Check {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    std::string relation;  // "<=", ">=" or "holds"
    bool pass = false;
    std::string note;
    bool timing = false;  // wall-clock value, kept out of JSON reports
};

Check at_most(std::string name, double value, double bound, std::string note = {});
Check at_least(std::string name, double value, double bound, std::string note = {});
Check holds(std::string name, bool ok, std::string note = {});
Check within_seconds(std::string name, double seconds, double limit);

struct Group {
    std::string id;
    std::string title;
    std::vector<Check> checks;
    double seconds = 0.0;

    bool pass() const;
    /// First failing check, or the last check when all pass.
    const Check* headline() const;
};

nlohmann::json to_json(const Check& c);
/// Without timings, so identical runs give identical reports.
nlohmann::json to_json(const Group& g);

/// Shared state between groups: the full-size kink pipeline is computed
/// once and reused.
class Context {
public:
    explicit Context(std::uint64_t seed = 20240611) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }
    const PipelineResult& kink(int nx, int nt, double* seconds = nullptr);

private:
    struct Run {
        int nx, nt;
        PipelineResult result;
        double seconds;
    };
    std::uint64_t seed_;
    std::deque<Run> runs_;  // stable references
};

using GroupFn = std::function<Group(Context&)>;

struct GroupSpec {
    std::string id;
    std::string title;
    GroupFn run;
};

/// The ten groups in acceptance order.
const std::vector<GroupSpec>& groups();

/// Group ids making up a verification suite; empty for unknown names.
std::vector<std::string> suite(const std::string& name);
const std::vector<std::string>& suite_names();

/// Runs one group, turning exceptions into a failing check.
Group run_group(const GroupSpec& spec, Context& ctx);

}  // namespace qlp::checks
