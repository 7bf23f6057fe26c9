#pragma once

// Scenario configuration, the tick/round simulation loop of each case study,
// trace persistence and summary metrics.

#include "wncs/analysis.hpp"
#include "wncs/control.hpp"
#include "wncs/netsim.hpp"
#include "wncs/plant.hpp"
#include "wncs/sched.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wncs {

enum class ScenarioKind { remote, remote_drops, consensus, sync_modes, self_triggered };

ScenarioKind parse_scenario_kind(std::string_view name);
std::string_view to_string(ScenarioKind k) noexcept;

struct AgentConfig {
    std::string preset = "selfbuilt";
    /// Optional replacements for the preset dynamics.
    std::optional<Mat> A;
    std::optional<Mat> B;
    Vec x0;
};

struct NetworkSettings {
    double loss_prob = 0.0;
    std::optional<double> beacon_loss_prob;
    bool per_flood_loss = false;
    std::uint32_t slots_per_round = 1;
    std::uint32_t round_period = 1; // ticks
    std::uint32_t switch_window = 3;
    std::uint32_t max_hyperperiod = 1000;
};

enum class AgreementRule { complete, detector };

struct ControllerConfig {
    /// Remote loops: explicit network-rate gain (m x n) instead of LQR synthesis.
    std::optional<Mat> F;
    /// LQR weights of the remote loop, or of the per-tick local loop in the
    /// distributed scenarios.
    Mat Q;
    Mat R;
    /// Weights of the network-rate synchronization layer.
    Mat sync_Q;
    Mat sync_R;
    Mat Q_sync;
    /// "all_to_all" or "chain", unless consensus_weights is given.
    std::string topology = "all_to_all";
    std::optional<Mat> consensus_weights;
    AgreementRule rule = AgreementRule::detector;
    double agreement_tol = 1e-4;
    std::uint32_t agreement_rounds = 3;
    double track_gain = -50.0;
    double integrator_gain = -5.0;
    double delta = 0.0;
    std::uint32_t max_horizon = 20;
    ManagerPolicy policy = ManagerPolicy::energy_saving;
};

struct ModeConfig {
    std::uint32_t id = 0;
    std::uint64_t at_tick = 0;
    /// Agents taking part in synchronization while the mode is active.
    std::vector<std::size_t> team;
};

struct ScenarioConfig {
    ScenarioKind scenario = ScenarioKind::remote;
    std::uint64_t seed = 0;
    std::uint64_t duration = 1; // ticks
    NetworkSettings network;
    std::vector<AgentConfig> agents;
    ControllerConfig controller;
    std::vector<ModeConfig> modes;
    std::optional<Mat> process_noise;
    std::optional<Mat> measurement_noise;
    /// Probability that an agent ignores a delivered control command.
    double artificial_drop = 0.0;
    std::vector<std::size_t> drop_agents;
    bool dwell_enforcement = false;

    /// Throws ValidationError listing every violation.
    void validate() const;
};

/// Strict JSON reader: unknown keys, wrong types and invariant violations are
/// all reported together in one ValidationError. Matrices are nested arrays
/// or {"diag": [...]}.
ScenarioConfig parse_config(std::string_view json_text);
ScenarioConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ScenarioConfig& cfg);

/// Plant models of the configured agents (noise overrides applied).
std::vector<PlantModel> agent_models(const ScenarioConfig& cfg);

// -- outputs -------------------------------------------------------------------

struct TraceRecord {
    std::uint64_t tick = 0;
    std::uint64_t round = 0;
    std::size_t agent = 0;
    Vec x;
    Vec u;
    std::optional<double> x_des;
    /// Set on the first tick of a round only.
    std::optional<SlotPurpose> slot;
    std::optional<bool> theta;
    std::optional<bool> phi;
    std::uint32_t mode = 0;
};

inline constexpr std::string_view kTraceHeader = "tick,round,agent,x0,x1,x2,x3,u,x_des,slot,theta,phi,mode";

/// One CSV line (no newline); doubles in shortest round-trip form.
std::string format_trace_row(const TraceRecord& r);

struct RoundLog {
    std::uint64_t round = 0;
    std::uint32_t current_mode = 0;
    std::uint32_t next_mode = 0;
    std::uint32_t countdown = 0;
    RoundSchedule schedule;
    std::vector<NodeId> beacon_receivers;
    /// Flooded messages: sender and declared demand (0 if none).
    std::vector<std::pair<NodeId, std::uint32_t>> flooded;
    std::vector<Delivery> deliveries;
    /// Per agent node: synced flag and known mode after this round's beacon.
    std::vector<std::pair<bool, std::uint32_t>> agent_sync;
};

std::string format_round_row(const RoundLog& r);
inline constexpr std::string_view kRoundHeader = "round,mode,next_mode,countdown,schedule,beacon_rx,flooded,deliveries";

struct ModeChangeReport {
    std::uint64_t round = 0;
    std::uint32_t from = 0;
    std::uint32_t to = 0;
    /// Pairwise position RMSE of the agents in both teams, before and after.
    double rmse_pre = 0.0;
    double rmse_post = 0.0;
    /// Every synced agent adopted the new mode in the same round.
    bool coherent = true;
    /// No agent's |angle| in the 5 s after exceeds 1.5x its running maximum before.
    bool angle_ok = true;
};

struct SummaryMetrics {
    double rmse_sync = 0.0;
    /// -1 when not applicable or never reached.
    std::int64_t consensus_rounds = -1;
    DutyCycle duty_cycle;
    std::vector<double> distance_traveled;
    bool stable = true;
    double max_abs_angle = 0.0;
    std::uint64_t ticks = 0;
    std::uint64_t rounds = 0;
    std::string divergence;
    std::vector<ModeChangeReport> mode_changes;
};

std::string metrics_to_json(const SummaryMetrics& m, const ScenarioConfig& cfg);

struct RunOptions {
    std::ostream* trace = nullptr;  // CSV, header included
    std::ostream* rounds = nullptr; // CSV, header included
    bool keep_records = false;
};

struct ScenarioResult {
    SummaryMetrics metrics;
    std::vector<TraceRecord> records;
    std::vector<RoundLog> round_logs;
};

/// Runs the configured case study. Throws ValidationError for bad configs and
/// InfeasibleScheduleError if the static schedule cannot be built. A hit of
/// the divergence guard ends the run early with metrics.stable = false.
ScenarioResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts = {});

/// Runs and writes trace.csv, rounds.csv and summary.json into `out_dir`.
SummaryMetrics run_to_directory(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

// -- audits --------------------------------------------------------------------

/// Per (sender, receiver) delivered sequence numbers strictly increase.
bool audit_delivery_order(const std::vector<RoundLog>& rounds);

/// Every agent's gap between consecutive granted control slots is at most the
/// demand it declared at the earlier grant, plus one round per lost message.
bool audit_demand_satisfaction(const std::vector<RoundLog>& rounds, NodeId host);

// -- sweeps --------------------------------------------------------------------

enum class SweepParam { delta, loss_prob, artificial_drop };
SweepParam parse_sweep_param(std::string_view name);
std::string_view to_string(SweepParam p) noexcept;

ScenarioConfig with_parameter(ScenarioConfig cfg, SweepParam p, double value);

struct SweepRow {
    double value = 0.0;
    std::uint64_t seed = 0;
    SummaryMetrics metrics;
};

struct Quantiles {
    double median = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
};

/// Linear-interpolation percentile (q in [0, 1]) of an unsorted sample.
double percentile(std::vector<double> v, double q);
Quantiles quantiles(const std::vector<double>& v);

struct SweepAggregate {
    double value = 0.0;
    Quantiles control_fraction;
    Quantiles energy;
    Quantiles rmse_sync;
    Quantiles max_abs_angle;
    std::size_t stable_runs = 0;
    std::size_t runs = 0;
};

struct SweepResult {
    SweepParam param = SweepParam::delta;
    std::vector<SweepRow> rows; // value-major, seed-minor
    std::vector<SweepAggregate> aggregates;
};

/// Cross product of values and seeds. Runs are independent; `threads` > 1
/// runs them concurrently without changing the result.
SweepResult sweep(const ScenarioConfig& base, SweepParam param, const std::vector<double>& values,
                  const std::vector<std::uint64_t>& seeds, unsigned threads = 1);

std::string sweep_to_json(const SweepResult& r);

// -- stability -----------------------------------------------------------------

struct AgentStability {
    std::size_t agent = 0;
    StabilityReport report;
    std::vector<double> probabilities;
    double loss_theta = 0.0;
    double loss_phi = 0.0;
};

struct StabilityCheck {
    bool supported = false;
    std::string reason;
    std::vector<AgentStability> agents;
    bool stable = false;
    /// Average dwell time across modes in rounds (0 with a single mode).
    double dwell_time = 0.0;
};

/// Mean-square verdict of every agent's remote loop at the configured loss
/// rates. Scenarios other than remote / remote_drops report unsupported.
StabilityCheck check_stability(const ScenarioConfig& cfg);
std::string stability_to_json(const StabilityCheck& c);

/// Static schedule of a scenario's periodic flows (remote, consensus,
/// sync_modes). Throws ConfigError for self_triggered (schedules are online).
std::optional<StaticSchedule> scenario_schedule(const ScenarioConfig& cfg);
std::string schedule_to_json(const StaticSchedule& s);

} // namespace wncs
