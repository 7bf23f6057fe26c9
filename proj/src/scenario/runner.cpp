#include "common.hpp"

#include <json.hpp>

#include <atomic>
#include <mutex>
#include <fstream>
#include <thread>

namespace wncs {

using nlohmann::json;

ScenarioResult run_scenario(const ScenarioConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    if (cfg.dwell_enforcement) {
        const StabilityCheck check = check_stability(cfg);
        if (!check.supported) throw ValidationError({"config.dwell_enforcement: " + check.reason});
        const double dwell = check.dwell_time;
        for (std::size_t s = 1; s < cfg.modes.size(); ++s) {
            const double gap = static_cast<double>(cfg.modes[s].at_tick - cfg.modes[s - 1].at_tick) /
                               cfg.network.round_period;
            if (gap < dwell)
                throw ValidationError({"config.modes[" + std::to_string(s) + "]: switch violates the average dwell time"});
        }
    }
    switch (cfg.scenario) {
    case ScenarioKind::remote:
    case ScenarioKind::remote_drops: return detail::run_remote(cfg, opts);
    case ScenarioKind::consensus: return detail::run_consensus(cfg, opts);
    case ScenarioKind::sync_modes: return detail::run_sync_modes(cfg, opts);
    case ScenarioKind::self_triggered: return detail::run_self_triggered(cfg, opts);
    }
    throw ConfigError("unhandled scenario");
}

SummaryMetrics run_to_directory(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ofstream trace(out_dir / "trace.csv", std::ios::binary);
    std::ofstream rounds(out_dir / "rounds.csv", std::ios::binary);
    if (!trace || !rounds) throw ConfigError("cannot write outputs to " + out_dir.string());
    RunOptions opts;
    opts.trace = &trace;
    opts.rounds = &rounds;
    ScenarioResult r = run_scenario(cfg, opts);
    std::ofstream summary(out_dir / "summary.json", std::ios::binary);
    summary << metrics_to_json(r.metrics, cfg) << '\n';
    return r.metrics;
}

SweepParam parse_sweep_param(std::string_view name) {
    if (name == "delta") return SweepParam::delta;
    if (name == "loss_prob") return SweepParam::loss_prob;
    if (name == "artificial_drop") return SweepParam::artificial_drop;
    throw ConfigError("unknown sweep parameter '" + std::string(name) + "'");
}

std::string_view to_string(SweepParam p) noexcept {
    switch (p) {
    case SweepParam::delta: return "delta";
    case SweepParam::loss_prob: return "loss_prob";
    case SweepParam::artificial_drop: return "artificial_drop";
    }
    return "delta";
}

ScenarioConfig with_parameter(ScenarioConfig cfg, SweepParam p, double value) {
    switch (p) {
    case SweepParam::delta: cfg.controller.delta = value; break;
    case SweepParam::loss_prob: cfg.network.loss_prob = value; break;
    case SweepParam::artificial_drop: cfg.artificial_drop = value; break;
    }
    return cfg;
}

SweepResult sweep(const ScenarioConfig& base, SweepParam param, const std::vector<double>& values,
                  const std::vector<std::uint64_t>& seeds, unsigned threads) {
    SweepResult out;
    out.param = param;
    for (double v : values)
        for (std::uint64_t s : seeds) out.rows.push_back(SweepRow{v, s, {}});
    for (const auto& row : out.rows) {
        ScenarioConfig cfg = with_parameter(base, param, row.value);
        cfg.seed = row.seed;
        cfg.validate();
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < out.rows.size(); i = next++) {
            try {
                ScenarioConfig cfg = with_parameter(base, param, out.rows[i].value);
                cfg.seed = out.rows[i].seed;
                out.rows[i].metrics = run_scenario(cfg).metrics;
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(out.rows.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    for (double v : values) {
        SweepAggregate agg;
        agg.value = v;
        std::vector<double> control, energy, rmse, angle;
        for (const auto& row : out.rows) {
            if (row.value != v) continue;
            ++agg.runs;
            if (row.metrics.stable) ++agg.stable_runs;
            control.push_back(row.metrics.duty_cycle.control);
            energy.push_back(row.metrics.duty_cycle.energy);
            rmse.push_back(row.metrics.rmse_sync);
            angle.push_back(row.metrics.max_abs_angle);
        }
        agg.control_fraction = quantiles(control);
        agg.energy = quantiles(energy);
        agg.rmse_sync = quantiles(rmse);
        agg.max_abs_angle = quantiles(angle);
        out.aggregates.push_back(agg);
    }
    return out;
}

namespace {

json quantiles_json(const Quantiles& q) { return {{"median", q.median}, {"p25", q.p25}, {"p75", q.p75}}; }

} // namespace

std::string sweep_to_json(const SweepResult& r) {
    json j;
    j["parameter"] = std::string(to_string(r.param));
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"value", row.value},
                        {"seed", row.seed},
                        {"stable", row.metrics.stable},
                        {"control_fraction", row.metrics.duty_cycle.control},
                        {"energy", row.metrics.duty_cycle.energy},
                        {"rmse_sync", row.metrics.rmse_sync},
                        {"max_abs_angle", row.metrics.max_abs_angle},
                        {"consensus_rounds", row.metrics.consensus_rounds},
                        {"distance_traveled", row.metrics.distance_traveled}});
    j["rows"] = rows;
    json aggs = json::array();
    for (const auto& a : r.aggregates)
        aggs.push_back({{"value", a.value},
                        {"runs", a.runs},
                        {"stable_runs", a.stable_runs},
                        {"control_fraction", quantiles_json(a.control_fraction)},
                        {"energy", quantiles_json(a.energy)},
                        {"rmse_sync", quantiles_json(a.rmse_sync)},
                        {"max_abs_angle", quantiles_json(a.max_abs_angle)}});
    j["aggregates"] = aggs;
    return j.dump(2);
}

StabilityCheck check_stability(const ScenarioConfig& cfg) {
    StabilityCheck out;
    if (cfg.scenario != ScenarioKind::remote && cfg.scenario != ScenarioKind::remote_drops) {
        out.reason = "stability analysis covers remote loops only; scenario '" + std::string(to_string(cfg.scenario)) +
                     "' is not supported";
        return out;
    }
    out.supported = true;
    out.stable = true;
    const std::vector<PlantModel> models = agent_models(cfg);
    const double pb = cfg.network.beacon_loss_prob.value_or(cfg.network.loss_prob);
    const double link = (1.0 - pb) * (1.0 - cfg.network.loss_prob);
    std::vector<ModeStabilityData> modes;
    for (std::size_t a = 0; a < models.size(); ++a) {
        const PlantModel lifted = lift_model(models[a], cfg.network.round_period);
        Mat F;
        if (cfg.controller.F) {
            F = *cfg.controller.F;
        } else {
            const Mat Q = cfg.controller.Q.size() ? cfg.controller.Q : detail::default_state_weight(lifted.n());
            const Mat R = cfg.controller.R.size() ? cfg.controller.R : detail::default_input_weight(lifted.m());
            F = design_lqr(lifted, Q, R);
        }
        const bool drops = std::find(cfg.drop_agents.begin(), cfg.drop_agents.end(), a) != cfg.drop_agents.end();
        AgentStability as;
        as.agent = a;
        as.loss_theta = 1.0 - link;
        as.loss_phi = 1.0 - link * (1.0 - (drops ? cfg.artificial_drop : 0.0));
        const ClosedLoopEnsemble ens = build_ensemble(lifted, F, as.loss_theta, as.loss_phi, Architecture::remote);
        as.report = mean_square_stable(ens);
        for (const auto& mem : ens.members) as.probabilities.push_back(mem.probability);
        out.stable = out.stable && as.report.stable;
        out.agents.push_back(std::move(as));
    }
    out.dwell_time = 0.0; // one operating mode
    return out;
}

std::string stability_to_json(const StabilityCheck& c) {
    json j;
    j["supported"] = c.supported;
    if (!c.supported) {
        j["reason"] = c.reason;
        return j.dump(2);
    }
    j["stable"] = c.stable;
    j["dwell_time_rounds"] = c.dwell_time;
    json agents = json::array();
    for (const auto& a : c.agents)
        agents.push_back({{"agent", a.agent},
                          {"spectral_radius", a.report.spectral_radius},
                          {"stable", a.report.stable},
                          {"dim", a.report.dim},
                          {"loss_theta", a.loss_theta},
                          {"loss_phi", a.loss_phi},
                          {"probabilities", a.probabilities}});
    j["agents"] = agents;
    return j.dump(2);
}

std::optional<StaticSchedule> scenario_schedule(const ScenarioConfig& cfg) {
    if (cfg.scenario == ScenarioKind::self_triggered)
        throw ConfigError("self_triggered schedules are computed online by the network manager");
    return synthesize_schedule(detail::scenario_flows(cfg), cfg.network.slots_per_round,
                               cfg.network.max_hyperperiod);
}

std::string schedule_to_json(const StaticSchedule& s) {
    json j;
    j["hyperperiod"] = s.hyperperiod;
    json table = json::array();
    for (std::size_t r = 0; r < s.table.size(); ++r) {
        json slots = json::array();
        for (const auto& a : s.table[r].assignments)
            slots.push_back({{"slot", a.slot_index}, {"owner", to_int(a.owner)}, {"purpose", std::string(to_string(a.purpose))}});
        table.push_back({{"round", r}, {"slots", slots}});
    }
    j["table"] = table;
    json inst = json::array();
    for (const auto& i : s.instances)
        inst.push_back({{"flow", i.flow_id}, {"instance", i.instance}, {"round", i.round}, {"slot", i.slot}});
    j["instances"] = inst;
    return j.dump(2);
}

} // namespace wncs
