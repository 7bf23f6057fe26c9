#include "common.hpp"

#include <algorithm>
#include <numeric>

namespace wncs::detail {

// Each agent runs a per-tick local LQR loop plus a network-rate coupling input
// u_i = F_ii x_i + sum_j u_ij, where u_ij = F_ij x_j is computed and sent by
// agent j whenever it transmits and held by agent i in between. When agent j
// transmits it also declares how many rounds its peers can do with the value
// it sends; the host's manager grants slots accordingly.
ScenarioResult run_self_triggered(const ScenarioConfig& cfg, const RunOptions& opts) {
    ScenarioResult result;
    SummaryMetrics& met = result.metrics;
    Recorder rec(opts, result);

    const std::size_t N = cfg.agents.size();
    const std::vector<PlantModel> models = agent_models(cfg);
    const Eigen::Index m = models[0].m();
    const std::uint32_t T = cfg.network.round_period;
    const std::uint32_t B = cfg.network.slots_per_round;
    const NetworkConfig net = make_network(cfg, N);
    const TwoLayerDesign design = design_two_layer(cfg, models);
    std::vector<std::size_t> everyone(N);
    std::iota(everyone.begin(), everyone.end(), std::size_t{0});
    const GainSet gains = design_team_gains(cfg, design, everyone);

    std::vector<Mat> contribution(N), phi_cl(N);
    for (std::size_t j = 0; j < N; ++j) {
        contribution[j] = peer_contribution_matrix(gains, j);
        const PlantModel& cl = design.lifted_closed_loop[j];
        phi_cl[j] = cl.A() + cl.B() * gains.block(j, j);
    }
    auto row_of = [](std::size_t receiver, std::size_t sender) { return receiver < sender ? receiver : receiver - 1; };

    std::vector<AgentSim> sims;
    for (std::size_t a = 0; a < N; ++a) sims.emplace_back(models[a], cfg.agents[a].x0, cfg.seed, a);
    // held[i][j]: contribution of agent j to agent i's input, last received.
    std::vector<std::vector<Vec>> held(N, std::vector<Vec>(N, Vec::Zero(m)));
    std::vector<Vec> v(N, Vec::Zero(m));

    std::set<NodeId> agent_nodes;
    for (std::size_t a = 0; a < N; ++a) agent_nodes.insert(agent_node(a));
    ManagerState manager = ManagerState::initial(agent_nodes, cfg.controller.policy, kHost);

    Rng net_rng = derive_stream(cfg.seed, "network");
    std::map<NodeId, NodeNetState> node_states;
    std::map<NodeId, std::vector<Message>> prev_inbox;
    std::uint64_t seq = 0;
    std::vector<RoundSchedule> schedules;
    PairwiseRmse rmse;

    for (std::uint64_t tick = 0; tick < cfg.duration && met.stable;) {
        const std::uint64_t k = tick / T;
        std::vector<Demand> demands;
        std::set<NodeId> heard;
        for (const auto& msg : prev_inbox[kHost]) {
            heard.insert(msg.sender);
            if (msg.demand) demands.push_back(Demand{msg.sender, *msg.demand});
        }
        std::set<NodeId> losses;
        for (NodeId a : manager.granted_last_round)
            if (!heard.contains(a)) losses.insert(a);
        auto [round_schedule, next_manager] = manager_allocate(std::move(manager), demands, losses, B);
        manager = std::move(next_manager);

        Beacon beacon;
        beacon.round_index = k;
        beacon.round_schedule = round_schedule;
        schedules.push_back(round_schedule);

        std::map<NodeId, Message> outbox;
        std::vector<Vec> y(N);
        for (std::size_t j = 0; j < N; ++j) {
            y[j] = sims[j].measure_now();
            const auto slot = round_schedule.slot_of(agent_node(j));
            if (!slot || slot->purpose != SlotPurpose::control) continue;
            std::uint32_t M = 1;
            if (gains.delta > 0.0) {
                Vec c = Vec::Zero(m);
                for (std::size_t i = 0; i < N; ++i)
                    if (i != j) c += held[j][i];
                const ErrorForecast f = forecast_held_input_error(phi_cl[j], design.lifted_closed_loop[j].B(), c,
                                                                  contribution[j],
                                                                  design.lifted_closed_loop[j].sigma_v(), y[j],
                                                                  gains.max_horizon);
                M = self_trigger_horizon([&](std::uint32_t h) { return f.drift[h - 1]; },
                                         [&](std::uint32_t h) { return f.covariance[h - 1]; }, gains.delta,
                                         gains.max_horizon);
            }
            outbox[agent_node(j)] =
                Message{agent_node(j), k, slot->slot_index, InputPayload{contribution[j] * y[j]}, M, ++seq};
        }
        RoundResult rr = run_round(net, beacon, outbox, node_states, net_rng);
        node_states = rr.node_states;

        std::vector<bool> theta(N), phi(N, false);
        for (std::size_t i = 0; i < N; ++i) {
            v[i] = gains.block(i, i) * y[i];
            for (std::size_t j = 0; j < N; ++j)
                if (j != i) v[i] += held[i][j];
            for (const auto& msg : rr.inboxes[agent_node(i)]) {
                if (msg.sender == kHost) continue;
                if (auto* p = std::get_if<InputPayload>(&msg.payload)) {
                    const std::size_t j = to_int(msg.sender) - 1;
                    held[i][j] = p->value.segment(static_cast<Eigen::Index>(row_of(i, j)) * m, m);
                    phi[i] = true;
                }
            }
            theta[i] = std::any_of(rr.inboxes[kHost].begin(), rr.inboxes[kHost].end(),
                                   [&](const Message& msg) { return msg.sender == agent_node(i); });
        }
        rec.round(make_round_log(beacon, rr, N));
        prev_inbox = std::move(rr.inboxes);

        const std::uint64_t end = std::min<std::uint64_t>(tick + T, cfg.duration);
        for (; tick < end; ++tick) {
            for (std::size_t a = 0; a < N; ++a) {
                const Vec meas = tick % T == 0 ? y[a] : sims[a].measure_now();
                const Vec u = design.local_gain[a] * meas + v[a];
                TraceRecord r{tick, k, a, sims[a].state.x, u, std::nullopt, std::nullopt, std::nullopt,
                              std::nullopt, 0};
                if (tick % T == 0) {
                    const auto slot = round_schedule.slot_of(agent_node(a));
                    r.slot = slot ? slot->purpose : SlotPurpose::off;
                    r.theta = theta[a];
                    r.phi = phi[a];
                }
                rec.row(std::move(r));
                sims[a].step(u);
            }
            rmse.add(sims, everyone);
            ++met.ticks;
            for (std::size_t a = 0; a < N; ++a)
                if (sims[a].diverged()) {
                    met.stable = false;
                    met.divergence = "agent " + std::to_string(a) + " left the guarded region at tick " +
                                     std::to_string(tick + 1);
                }
            if (!met.stable) {
                ++tick;
                break;
            }
        }
        ++met.rounds;
    }
    met.rmse_sync = rmse.value();
    met.duty_cycle = duty_cycle_metric(schedules, B);
    finish_agents(met, sims);
    return result;
}

} // namespace wncs::detail
