#include "common.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>

namespace wncs {

using nlohmann::json;

std::string metrics_to_json(const SummaryMetrics& m, const ScenarioConfig& cfg) {
    json j;
    j["scenario"] = std::string(to_string(cfg.scenario));
    j["seed"] = cfg.seed;
    j["stable"] = m.stable;
    if (!m.divergence.empty()) j["divergence"] = m.divergence;
    j["ticks"] = m.ticks;
    j["rounds"] = m.rounds;
    j["rmse_sync"] = m.rmse_sync;
    j["consensus_rounds"] = m.consensus_rounds;
    j["duty_cycle"] = {{"control", m.duty_cycle.control},
                       {"other", m.duty_cycle.other},
                       {"off", m.duty_cycle.off},
                       {"energy", m.duty_cycle.energy}};
    j["distance_traveled"] = m.distance_traveled;
    j["max_abs_angle"] = m.max_abs_angle;
    json changes = json::array();
    for (const auto& c : m.mode_changes)
        changes.push_back({{"round", c.round},
                           {"from", c.from},
                           {"to", c.to},
                           {"rmse_pre", c.rmse_pre},
                           {"rmse_post", c.rmse_post},
                           {"coherent", c.coherent},
                           {"angle_ok", c.angle_ok}});
    j["mode_changes"] = changes;
    return j.dump(2);
}

bool audit_delivery_order(const std::vector<RoundLog>& rounds) {
    std::vector<Delivery> all;
    for (const auto& r : rounds) all.insert(all.end(), r.deliveries.begin(), r.deliveries.end());
    return deliveries_in_order(all);
}

bool audit_demand_satisfaction(const std::vector<RoundLog>& rounds, NodeId host) {
    // agent -> latest round by which it must be granted again
    std::map<NodeId, std::uint64_t> deadline;
    for (const auto& r : rounds) {
        std::set<NodeId> granted;
        for (const auto& a : r.schedule.assignments)
            if (a.purpose == SlotPurpose::control) granted.insert(a.owner);
        for (const auto& [agent, due] : deadline)
            if (due == r.round && !granted.contains(agent)) return false;
        for (NodeId agent : granted) {
            deadline.erase(agent);
            const bool reached_host = std::any_of(r.deliveries.begin(), r.deliveries.end(), [&](const Delivery& d) {
                return d.sender == agent && d.receiver == host;
            });
            if (!reached_host) {
                deadline[agent] = r.round + 1;
                continue;
            }
            for (const auto& [sender, demand] : r.flooded)
                if (sender == agent && demand > 0) deadline[agent] = r.round + demand;
        }
    }
    return true;
}

double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + (v[hi] - v[lo]) * frac;
}

Quantiles quantiles(const std::vector<double>& v) {
    return Quantiles{percentile(v, 0.5), percentile(v, 0.25), percentile(v, 0.75)};
}

namespace detail {

NetworkConfig make_network(const ScenarioConfig& cfg, std::size_t agents) {
    NetworkConfig net;
    net.node_ids.insert(kHost);
    for (std::size_t a = 0; a < agents; ++a) net.node_ids.insert(agent_node(a));
    net.host_id = kHost;
    net.loss_prob = cfg.network.loss_prob;
    net.beacon_loss_prob = cfg.network.beacon_loss_prob;
    net.per_flood_loss = cfg.network.per_flood_loss;
    net.slots_per_round = cfg.network.slots_per_round;
    net.round_period = cfg.network.round_period;
    net.switch_window = cfg.network.switch_window;
    net.validate();
    return net;
}

void finish_agents(SummaryMetrics& m, const std::vector<AgentSim>& sims) {
    m.distance_traveled.clear();
    for (const auto& s : sims) {
        m.distance_traveled.push_back(s.distance);
        m.max_abs_angle = std::max(m.max_abs_angle, s.max_angle);
    }
}

Mat default_state_weight(Eigen::Index n) {
    Vec d(n);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = i < (n + 1) / 2 ? 1.0 : 0.1;
    return d.asDiagonal();
}

Mat default_input_weight(Eigen::Index m) { return 0.1 * Mat::Identity(m, m); }

std::vector<Flow> scenario_flows(const ScenarioConfig& cfg) {
    std::vector<Flow> flows;
    const std::size_t N = cfg.agents.size();
    for (std::size_t a = 0; a < N; ++a)
        flows.push_back(Flow{static_cast<std::uint32_t>(a), agent_node(a), 1, 1, 1});
    if (cfg.scenario == ScenarioKind::remote || cfg.scenario == ScenarioKind::remote_drops)
        flows.push_back(Flow{static_cast<std::uint32_t>(N), kHost, 1, 1, 1});
    return flows;
}

StaticSchedule require_schedule(const ScenarioConfig& cfg) {
    auto s = synthesize_schedule(scenario_flows(cfg), cfg.network.slots_per_round, cfg.network.max_hyperperiod);
    if (!s)
        throw InfeasibleScheduleError("no static schedule fits " + std::to_string(scenario_flows(cfg).size()) +
                                      " flows into " + std::to_string(cfg.network.slots_per_round) +
                                      " slots per round");
    return *s;
}

TwoLayerDesign design_two_layer(const ScenarioConfig& cfg, const std::vector<PlantModel>& models) {
    TwoLayerDesign d;
    for (const auto& model : models) {
        const Mat Q = cfg.controller.Q.size() ? cfg.controller.Q : default_state_weight(model.n());
        const Mat R = cfg.controller.R.size() ? cfg.controller.R : default_input_weight(model.m());
        const Mat Fl = design_lqr(model, Q, R);
        d.local_gain.push_back(Fl);
        d.lifted_closed_loop.push_back(lift_model(closed_loop_model(model, Fl), cfg.network.round_period));
    }
    return d;
}

GainSet design_team_gains(const ScenarioConfig& cfg, const TwoLayerDesign& design, const std::vector<std::size_t>& team) {
    std::vector<PlantModel> models;
    for (std::size_t a : team) models.push_back(design.lifted_closed_loop[a]);
    const Eigen::Index n = models.front().n(), m = models.front().m();
    const Mat Qi = cfg.controller.sync_Q.size() ? cfg.controller.sync_Q : Mat(1e-9 * Mat::Identity(n, n));
    const Mat Ri = cfg.controller.sync_R.size() ? cfg.controller.sync_R : Mat(Mat::Identity(m, m));
    Mat Qs = cfg.controller.Q_sync;
    if (!Qs.size()) {
        Qs = Mat::Zero(n, n);
        Qs(kPositionIndex, kPositionIndex) = 100.0;
    }
    GainSet g = design_sync_lqr(models, {Qi}, {Ri}, Qs);
    g.delta = cfg.controller.delta;
    g.max_horizon = cfg.controller.max_horizon;
    return g;
}

} // namespace detail

} // namespace wncs
