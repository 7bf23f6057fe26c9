#include "common.hpp"

namespace wncs::detail {

namespace {

Mat consensus_weights(const ScenarioConfig& cfg) {
    const auto N = static_cast<Eigen::Index>(cfg.agents.size());
    if (cfg.controller.consensus_weights) return *cfg.controller.consensus_weights;
    if (cfg.controller.topology == "chain") {
        Mat W = Mat::Zero(N, N);
        W(0, 0) = 1.0;
        for (Eigen::Index i = 1; i < N; ++i) W(i, i) = W(i, i - 1) = 0.5;
        return W;
    }
    return Mat::Constant(N, N, 1.0 / static_cast<double>(N));
}

} // namespace

// Agents agree on a common cart position over the network and then track it
// locally every tick. Until an agent declares agreement it holds its initial
// position.
ScenarioResult run_consensus(const ScenarioConfig& cfg, const RunOptions& opts) {
    ScenarioResult result;
    SummaryMetrics& met = result.metrics;
    Recorder rec(opts, result);

    const std::size_t N = cfg.agents.size();
    const std::vector<PlantModel> models = agent_models(cfg);
    const std::uint32_t T = cfg.network.round_period;
    const NetworkConfig net = make_network(cfg, N);
    const StaticSchedule sched = require_schedule(cfg);
    const Mat W = consensus_weights(cfg);
    const auto& cc = cfg.controller;
    const std::size_t R = cc.agreement_rounds;

    GainSet gains;
    gains.track_gain = cc.track_gain;
    gains.integrator_gain = cc.integrator_gain;

    std::vector<AgentSim> sims;
    std::vector<ConsensusState> cons(N);
    std::vector<double> integ(N, 0.0), hold_pos(N);
    std::vector<std::vector<double>> own_hist(N);
    std::vector<std::map<std::size_t, double>> held(N);
    std::vector<std::map<std::size_t, std::vector<double>>> held_hist(N);
    std::vector<std::int64_t> agreed_after(N, -1);
    for (std::size_t a = 0; a < N; ++a) {
        sims.emplace_back(models[a], cfg.agents[a].x0, cfg.seed, a);
        cons[a].x_des = cfg.agents[a].x0(kPositionIndex);
        hold_pos[a] = cons[a].x_des;
        own_hist[a].push_back(cons[a].x_des);
    }

    Rng net_rng = derive_stream(cfg.seed, "network");
    std::map<NodeId, NodeNetState> node_states;
    std::uint64_t seq = 0;
    std::vector<RoundSchedule> schedules;
    std::vector<Vec> u(N, Vec::Zero(1));

    for (std::uint64_t tick = 0; tick < cfg.duration && met.stable;) {
        const std::uint64_t k = tick / T;
        Beacon beacon;
        beacon.round_index = k;
        beacon.round_schedule = sched.at_round(k);
        schedules.push_back(beacon.round_schedule);

        std::map<NodeId, Message> outbox;
        for (std::size_t a = 0; a < N; ++a)
            if (auto slot = beacon.round_schedule.slot_of(agent_node(a)))
                outbox[agent_node(a)] = Message{agent_node(a), k, slot->slot_index,
                                                DesiredPayload{Vec::Constant(1, cons[a].x_des)}, {}, ++seq};
        RoundResult rr = run_round(net, beacon, outbox, node_states, net_rng);
        node_states = rr.node_states;

        std::vector<bool> theta(N, false), phi(N, true);
        for (std::size_t i = 0; i < N; ++i) {
            std::set<std::size_t> fresh;
            for (const auto& msg : rr.inboxes[agent_node(i)]) {
                const std::size_t j = to_int(msg.sender) - 1;
                if (to_int(msg.sender) == 0 || W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= 0.0)
                    continue;
                if (auto* p = std::get_if<DesiredPayload>(&msg.payload)) {
                    held[i][j] = p->value(0);
                    fresh.insert(j);
                }
            }
            std::size_t in_neighbors = 0;
            for (std::size_t j = 0; j < N; ++j) {
                if (j == i || W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= 0.0) continue;
                ++in_neighbors;
                if (!fresh.contains(j)) phi[i] = false;
                if (held[i].contains(j)) held_hist[i][j].push_back(held[i].at(j));
            }
            theta[i] = std::any_of(rr.inboxes[kHost].begin(), rr.inboxes[kHost].end(),
                                   [&](const Message& msg) { return msg.sender == agent_node(i); });

            if (cons[i].agreed) continue;
            cons[i] = consensus_update(cons[i], i, held[i], W.row(static_cast<Eigen::Index>(i)).transpose());
            own_hist[i].push_back(cons[i].x_des);
            bool agreed = false;
            if (cc.rule == AgreementRule::complete) {
                agreed = fresh.size() == in_neighbors;
            } else {
                std::vector<std::vector<double>> hs{own_hist[i]};
                for (const auto& [j, h] : held_hist[i]) hs.push_back(h);
                agreed = held_hist[i].size() == in_neighbors && agreement_detector(hs, cc.agreement_tol, R);
            }
            if (agreed) {
                cons[i].agreed = true;
                cons[i].x_star = cons[i].x_des;
                agreed_after[i] = static_cast<std::int64_t>(k + 1);
            }
        }
        rec.round(make_round_log(beacon, rr, N));

        const std::uint64_t end = std::min<std::uint64_t>(tick + T, cfg.duration);
        for (; tick < end; ++tick) {
            for (std::size_t a = 0; a < N; ++a) {
                const double pos = sims[a].measure_now()(kPositionIndex);
                if (cons[a].agreed) {
                    TrackOutput out = consensus_track_input(pos, cons[a], gains, integ[a]);
                    u[a] = out.u;
                    integ[a] = out.integ;
                } else {
                    u[a] = Vec::Constant(1, cc.track_gain * (pos - hold_pos[a]));
                }
                TraceRecord r{tick, k, a, sims[a].state.x, u[a], cons[a].x_des, std::nullopt, std::nullopt,
                              std::nullopt, 0};
                if (tick % T == 0) {
                    const auto slot = beacon.round_schedule.slot_of(agent_node(a));
                    r.slot = slot ? slot->purpose : SlotPurpose::off;
                    r.theta = theta[a];
                    r.phi = static_cast<bool>(phi[a]);
                }
                rec.row(std::move(r));
            }
            for (std::size_t a = 0; a < N; ++a) sims[a].step(u[a]);
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

    met.consensus_rounds = *std::max_element(agreed_after.begin(), agreed_after.end());
    if (std::find(agreed_after.begin(), agreed_after.end(), -1) != agreed_after.end()) met.consensus_rounds = -1;
    met.duty_cycle = duty_cycle_metric(schedules, cfg.network.slots_per_round);
    finish_agents(met, sims);
    return result;
}

} // namespace wncs::detail
