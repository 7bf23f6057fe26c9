#pragma once

// Pieces shared by the scenario loops.

#include "wncs/errors.hpp"
#include "wncs/rng.hpp"
#include "wncs/scenario.hpp"

#include <cmath>
#include <ostream>

namespace wncs::detail {

inline NodeId agent_node(std::size_t agent) { return NodeId{static_cast<std::uint32_t>(agent + 1)}; }
inline constexpr NodeId kHost{0};

/// One simulated plant with its own noise streams.
struct AgentSim {
    PlantModel model;
    PlantState state;
    Rng process_rng;
    Rng measure_rng;
    double distance = 0.0;
    double max_angle = 0.0;

    AgentSim(PlantModel m, const Vec& x0, std::uint64_t seed, std::size_t index)
        : model(std::move(m)), state{x0, 0}, process_rng(derive_stream(seed, "process", index)),
          measure_rng(derive_stream(seed, "measure", index)) {
        track_angle();
    }

    Vec measure_now() { return measure(model, state, measure_rng); }

    void step(const Vec& u) {
        const double before = state.x(kPositionIndex);
        state = step_plant(model, state, u, process_rng);
        distance += std::abs(state.x(kPositionIndex) - before);
        track_angle();
    }

    bool diverged() const { return max_abs(state.x) > kDivergenceBound; }

private:
    void track_angle() {
        if (state.x.size() >= 4) max_angle = std::max(max_angle, std::abs(state.x(kAngleIndex)));
    }
};

/// Collects trace rows, round logs and the common metrics.
class Recorder {
public:
    Recorder(const RunOptions& opts, ScenarioResult& result) : opts_(opts), result_(result) {
        if (opts_.trace) *opts_.trace << kTraceHeader << '\n';
        if (opts_.rounds) *opts_.rounds << kRoundHeader << '\n';
    }

    void row(TraceRecord r) {
        if (opts_.trace) *opts_.trace << format_trace_row(r) << '\n';
        if (opts_.keep_records) result_.records.push_back(std::move(r));
    }

    void round(RoundLog r) {
        if (opts_.rounds) *opts_.rounds << format_round_row(r) << '\n';
        if (opts_.keep_records) result_.round_logs.push_back(std::move(r));
    }

private:
    const RunOptions& opts_;
    ScenarioResult& result_;
};

NetworkConfig make_network(const ScenarioConfig& cfg, std::size_t agents);

/// Log entry for a finished round.
RoundLog make_round_log(const Beacon& beacon, const RoundResult& rr, std::size_t agents);

/// Final per-agent metrics and the divergence message.
void finish_agents(SummaryMetrics& m, const std::vector<AgentSim>& sims);

/// Root mean of squared pairwise position differences accumulated tick by tick.
class PairwiseRmse {
public:
    void add(const std::vector<AgentSim>& sims, const std::vector<std::size_t>& team) {
        for (std::size_t a = 0; a < team.size(); ++a)
            for (std::size_t b = a + 1; b < team.size(); ++b) {
                const double d = sims[team[a]].state.x(kPositionIndex) - sims[team[b]].state.x(kPositionIndex);
                sum_ += d * d;
                ++count_;
            }
    }
    double value() const { return count_ ? std::sqrt(sum_ / static_cast<double>(count_)) : 0.0; }
    std::uint64_t count() const { return count_; }

private:
    double sum_ = 0.0;
    std::uint64_t count_ = 0;
};

/// Default LQR weights: unit weight on the first half of the state, 0.1 on the rest.
Mat default_state_weight(Eigen::Index n);
Mat default_input_weight(Eigen::Index m);

ScenarioResult run_remote(const ScenarioConfig& cfg, const RunOptions& opts);
ScenarioResult run_consensus(const ScenarioConfig& cfg, const RunOptions& opts);
ScenarioResult run_sync_modes(const ScenarioConfig& cfg, const RunOptions& opts);
ScenarioResult run_self_triggered(const ScenarioConfig& cfg, const RunOptions& opts);

/// Flows of the statically scheduled scenarios.
std::vector<Flow> scenario_flows(const ScenarioConfig& cfg);
StaticSchedule require_schedule(const ScenarioConfig& cfg);

/// Per-tick local LQR gain and the network-rate synchronization models.
struct TwoLayerDesign {
    std::vector<Mat> local_gain;
    std::vector<PlantModel> lifted_closed_loop;
};
TwoLayerDesign design_two_layer(const ScenarioConfig& cfg, const std::vector<PlantModel>& models);
GainSet design_team_gains(const ScenarioConfig& cfg, const TwoLayerDesign& design, const std::vector<std::size_t>& team);

} // namespace wncs::detail
