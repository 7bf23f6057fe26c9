#include "common.hpp"

#include <algorithm>

namespace wncs::detail {

// The host node runs one remote controller per agent. Every round each agent
// sends its measurement and the host sends the stacked predicted inputs for
// the next round. A command delivered in round k is applied from round k+1.
ScenarioResult run_remote(const ScenarioConfig& cfg, const RunOptions& opts) {
    ScenarioResult result;
    SummaryMetrics& met = result.metrics;
    Recorder rec(opts, result);

    const std::size_t N = cfg.agents.size();
    const std::vector<PlantModel> models = agent_models(cfg);
    const Eigen::Index n = models[0].n(), m = models[0].m();
    const std::uint32_t T = cfg.network.round_period;
    const NetworkConfig net = make_network(cfg, N);
    const StaticSchedule sched = require_schedule(cfg);

    std::vector<PlantModel> lifted;
    std::vector<Mat> gains;
    for (const auto& model : models) {
        lifted.push_back(lift_model(model, T));
        if (cfg.controller.F) {
            gains.push_back(*cfg.controller.F);
        } else {
            const Mat Q = cfg.controller.Q.size() ? cfg.controller.Q : default_state_weight(n);
            const Mat R = cfg.controller.R.size() ? cfg.controller.R : default_input_weight(m);
            gains.push_back(design_lqr(lifted.back(), Q, R));
        }
    }

    std::vector<AgentSim> sims;
    for (std::size_t a = 0; a < N; ++a) sims.emplace_back(models[a], cfg.agents[a].x0, cfg.seed, a);
    std::vector<RemoteLoopState> loops(N, RemoteLoopState::zero(n, m));
    std::vector<Vec> applied(N, Vec::Zero(m));
    std::vector<Rng> drop_rng;
    std::vector<double> drop_p(N, 0.0);
    for (std::size_t a = 0; a < N; ++a) {
        drop_rng.push_back(derive_stream(cfg.seed, "artificial_drop", a));
        if (std::find(cfg.drop_agents.begin(), cfg.drop_agents.end(), a) != cfg.drop_agents.end())
            drop_p[a] = cfg.artificial_drop;
    }
    Rng net_rng = derive_stream(cfg.seed, "network");
    std::map<NodeId, NodeNetState> node_states;
    std::map<NodeId, std::vector<Message>> prev_inbox;
    std::uint64_t seq = 0;
    std::vector<RoundSchedule> schedules;

    for (std::uint64_t tick = 0; tick < cfg.duration && met.stable;) {
        const std::uint64_t k = tick / T;
        Beacon beacon;
        beacon.round_index = k;
        beacon.round_schedule = sched.at_round(k);
        schedules.push_back(beacon.round_schedule);

        std::map<NodeId, Message> outbox;
        std::vector<Vec> y(N);
        for (std::size_t a = 0; a < N; ++a) {
            y[a] = sims[a].measure_now();
            if (auto slot = beacon.round_schedule.slot_of(agent_node(a)))
                outbox[agent_node(a)] = Message{agent_node(a), k, slot->slot_index, StatePayload{y[a]}, {}, ++seq};
        }
        // Controller: measurements that arrived last round.
        Vec stacked(static_cast<Eigen::Index>(N) * m);
        for (std::size_t a = 0; a < N; ++a) {
            std::optional<Vec> received;
            for (const auto& msg : prev_inbox[kHost])
                if (msg.sender == agent_node(a))
                    if (auto* p = std::get_if<StatePayload>(&msg.payload)) received = p->value;
            auto [loop, next] = advance_remote_loop(loops[a], lifted[a], gains[a], received,
                                                    static_cast<std::int64_t>(k) - 1);
            loops[a] = std::move(loop);
            stacked.segment(static_cast<Eigen::Index>(a) * m, m) = next;
        }
        if (auto slot = beacon.round_schedule.slot_of(kHost))
            outbox[kHost] = Message{kHost, k, slot->slot_index, InputPayload{stacked}, {}, ++seq};

        RoundResult rr = run_round(net, beacon, outbox, node_states, net_rng);
        node_states = rr.node_states;

        // Actuators: command delivered last round.
        std::vector<bool> phi(N, false), theta(N, false);
        for (std::size_t a = 0; a < N; ++a) {
            std::optional<Vec> cmd;
            for (const auto& msg : prev_inbox[agent_node(a)])
                if (msg.sender == kHost)
                    if (auto* p = std::get_if<InputPayload>(&msg.payload))
                        cmd = p->value.segment(static_cast<Eigen::Index>(a) * m, m);
            const bool dropped = drop_rng[a].bernoulli(drop_p[a]);
            phi[a] = cmd.has_value() && !dropped;
            applied[a] = apply_actuation_zoh(phi[a], phi[a] ? *cmd : applied[a], applied[a]);
            theta[a] = std::any_of(rr.inboxes[kHost].begin(), rr.inboxes[kHost].end(),
                                   [&](const Message& msg) { return msg.sender == agent_node(a); });
        }
        rec.round(make_round_log(beacon, rr, N));
        prev_inbox = std::move(rr.inboxes);

        const std::uint64_t end = std::min<std::uint64_t>(tick + T, cfg.duration);
        for (; tick < end; ++tick) {
            for (std::size_t a = 0; a < N; ++a) {
                TraceRecord r{tick, k, a, sims[a].state.x, applied[a], std::nullopt, std::nullopt,
                              std::nullopt, std::nullopt, 0};
                if (tick % T == 0) {
                    const auto slot = beacon.round_schedule.slot_of(agent_node(a));
                    r.slot = slot ? slot->purpose : SlotPurpose::off;
                    r.theta = theta[a];
                    r.phi = phi[a];
                }
                rec.row(std::move(r));
            }
            for (std::size_t a = 0; a < N; ++a) sims[a].step(applied[a]);
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
    met.duty_cycle = duty_cycle_metric(schedules, cfg.network.slots_per_round);
    finish_agents(met, sims);
    return result;
}

} // namespace wncs::detail
