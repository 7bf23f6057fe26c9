#include "common.hpp"

#include <algorithm>

namespace wncs::detail {

namespace {

constexpr std::uint64_t kReportWindowTicks = 500; // 5 s

double window_rmse(const std::vector<std::vector<double>>& pos, const std::vector<std::size_t>& team,
                   std::uint64_t from, std::uint64_t to) {
    double sum = 0.0;
    std::uint64_t count = 0;
    for (std::uint64_t t = from; t < to && t < pos.size(); ++t)
        for (std::size_t a = 0; a < team.size(); ++a)
            for (std::size_t b = a + 1; b < team.size(); ++b) {
                const double d = pos[t][team[a]] - pos[t][team[b]];
                sum += d * d;
                ++count;
            }
    return count ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
}

} // namespace

// Agents stabilize their poles with a per-tick local LQR loop. In modes with a
// team, members add a network-rate synchronization input computed from their
// own state and the peer states received in earlier rounds. The host announces
// every mode switch `switch_window` rounds ahead through the beacon.
ScenarioResult run_sync_modes(const ScenarioConfig& cfg, const RunOptions& opts) {
    ScenarioResult result;
    SummaryMetrics& met = result.metrics;
    Recorder rec(opts, result);

    const std::size_t N = cfg.agents.size();
    const std::vector<PlantModel> models = agent_models(cfg);
    const std::uint32_t T = cfg.network.round_period;
    const std::uint32_t W = cfg.network.switch_window;
    const NetworkConfig net = make_network(cfg, N);
    const StaticSchedule sched = require_schedule(cfg);
    const TwoLayerDesign design = design_two_layer(cfg, models);

    std::map<std::uint32_t, std::vector<std::size_t>> team_of;
    std::map<std::uint32_t, GainSet> gains_of;
    std::vector<std::uint64_t> switch_round;
    for (std::size_t s = 0; s < cfg.modes.size(); ++s) {
        const auto& md = cfg.modes[s];
        std::vector<std::size_t> team = md.team;
        std::sort(team.begin(), team.end());
        team.erase(std::unique(team.begin(), team.end()), team.end());
        team_of[md.id] = team;
        if (team.size() >= 2) gains_of[md.id] = design_team_gains(cfg, design, team);
        switch_round.push_back(md.at_tick / T);
        if (s > 0 && switch_round[s] - switch_round[s - 1] <= W)
            throw ValidationError({"config.modes[" + std::to_string(s) +
                                   "]: switches must be more than switch_window rounds apart"});
    }

    std::vector<AgentSim> sims;
    for (std::size_t a = 0; a < N; ++a) sims.emplace_back(models[a], cfg.agents[a].x0, cfg.seed, a);
    std::vector<std::map<std::size_t, PeerEstimate>> peers(N);
    std::vector<Vec> v(N, Vec::Zero(models[0].m()));

    Rng net_rng = derive_stream(cfg.seed, "network");
    std::map<NodeId, NodeNetState> node_states;
    for (std::size_t a = 0; a <= N; ++a) node_states[NodeId{static_cast<std::uint32_t>(a)}].known_mode = ModeId{cfg.modes[0].id};
    std::uint64_t seq = 0;
    std::vector<RoundSchedule> schedules;
    std::vector<std::vector<std::uint32_t>> known(N);  // per agent, per round
    std::vector<std::vector<bool>> synced(N);
    std::vector<std::vector<double>> pos_hist, angle_hist;
    PairwiseRmse rmse;

    Beacon beacon;
    beacon.current_mode = beacon.next_mode = ModeId{cfg.modes[0].id};
    for (std::uint64_t tick = 0; tick < cfg.duration && met.stable;) {
        const std::uint64_t k = tick / T;
        if (k > 0) beacon = mode_change_tick(beacon);
        beacon.round_index = k;
        for (std::size_t s = 1; s < cfg.modes.size(); ++s) {
            const std::uint64_t announce = switch_round[s] > W ? switch_round[s] - W : 0;
            if (k == announce) {
                beacon.next_mode = ModeId{cfg.modes[s].id};
                beacon.countdown = static_cast<std::uint32_t>(switch_round[s] - announce);
            }
        }
        beacon.round_schedule = sched.at_round(k);
        schedules.push_back(beacon.round_schedule);

        std::map<NodeId, Message> outbox;
        std::vector<Vec> y(N);
        for (std::size_t a = 0; a < N; ++a) {
            y[a] = sims[a].measure_now();
            if (auto slot = beacon.round_schedule.slot_of(agent_node(a)))
                outbox[agent_node(a)] = Message{agent_node(a), k, slot->slot_index, StatePayload{y[a]}, {}, ++seq};
        }
        RoundResult rr = run_round(net, beacon, outbox, node_states, net_rng);
        node_states = rr.node_states;

        std::vector<bool> theta(N), phi(N);
        std::vector<std::uint32_t> agent_mode(N);
        for (std::size_t i = 0; i < N; ++i) {
            const NodeNetState& st = node_states.at(agent_node(i));
            agent_mode[i] = to_int(st.known_mode);
            known[i].push_back(agent_mode[i]);
            synced[i].push_back(st.synced);
            v[i].setZero();
            const auto g = gains_of.find(agent_mode[i]);
            if (st.synced && g != gains_of.end()) {
                const auto& team = team_of.at(agent_mode[i]);
                const auto me = std::find(team.begin(), team.end(), i);
                if (me != team.end()) {
                    std::map<std::size_t, PeerEstimate> by_slot;
                    bool complete = true;
                    for (std::size_t p = 0; p < team.size(); ++p) {
                        if (team[p] == i) continue;
                        const auto it = peers[i].find(team[p]);
                        if (it == peers[i].end()) complete = false;
                        else by_slot[p] = it->second;
                    }
                    if (complete)
                        v[i] = distributed_input(static_cast<std::size_t>(me - team.begin()), y[i], by_slot, g->second);
                }
            }
            // Receptions of this round are used from the next round on.
            std::size_t got = 0;
            for (const auto& msg : rr.inboxes[agent_node(i)]) {
                if (msg.sender == kHost) continue;
                if (auto* p = std::get_if<StatePayload>(&msg.payload)) {
                    const std::size_t j = to_int(msg.sender) - 1;
                    peers[i][j] = peer_estimate_zoh(peers[i][j], true, p->value, static_cast<std::int64_t>(k));
                    ++got;
                }
            }
            phi[i] = got + 1 == N;
            theta[i] = std::any_of(rr.inboxes[kHost].begin(), rr.inboxes[kHost].end(),
                                   [&](const Message& msg) { return msg.sender == agent_node(i); });
        }
        rec.round(make_round_log(beacon, rr, N));
        const auto& host_team = team_of.at(to_int(beacon.current_mode));

        const std::uint64_t end = std::min<std::uint64_t>(tick + T, cfg.duration);
        for (; tick < end; ++tick) {
            std::vector<double> pos(N), ang(N);
            for (std::size_t a = 0; a < N; ++a) {
                const Vec meas = tick % T == 0 ? y[a] : sims[a].measure_now();
                const Vec u = design.local_gain[a] * meas + v[a];
                pos[a] = sims[a].state.x(kPositionIndex);
                ang[a] = sims[a].state.x.size() > kAngleIndex ? std::abs(sims[a].state.x(kAngleIndex)) : 0.0;
                TraceRecord r{tick, k, a, sims[a].state.x, u, std::nullopt, std::nullopt, std::nullopt,
                              std::nullopt, agent_mode[a]};
                if (tick % T == 0) {
                    const auto slot = beacon.round_schedule.slot_of(agent_node(a));
                    r.slot = slot ? slot->purpose : SlotPurpose::off;
                    r.theta = theta[a];
                    r.phi = phi[a];
                }
                rec.row(std::move(r));
                sims[a].step(u);
            }
            pos_hist.push_back(std::move(pos));
            angle_hist.push_back(std::move(ang));
            rmse.add(sims, host_team);
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

    // Mode change reports.
    for (std::size_t s = 1; s < cfg.modes.size(); ++s) {
        const std::uint64_t r_s = switch_round[s];
        if (r_s >= met.rounds) break;
        ModeChangeReport rep;
        rep.round = r_s;
        rep.from = cfg.modes[s - 1].id;
        rep.to = cfg.modes[s].id;
        for (std::size_t a = 0; a < N; ++a) {
            if (!synced[a][r_s]) continue;
            std::uint64_t first = r_s;
            while (first > 0 && known[a][first - 1] == rep.to) --first;
            if (known[a][r_s] != rep.to || first != r_s) rep.coherent = false;
        }
        const auto& old_team = team_of.at(rep.from);
        const auto& new_team = team_of.at(rep.to);
        std::vector<std::size_t> stay;
        std::set_intersection(old_team.begin(), old_team.end(), new_team.begin(), new_team.end(),
                              std::back_inserter(stay));
        const std::uint64_t t_s = r_s * T;
        const std::uint64_t t_prev = cfg.modes[s - 1].at_tick;
        const std::uint64_t t_next = s + 1 < cfg.modes.size() ? cfg.modes[s + 1].at_tick : pos_hist.size();
        rep.rmse_pre = window_rmse(pos_hist, stay, std::max(t_prev, t_s > kReportWindowTicks ? t_s - kReportWindowTicks : 0), t_s);
        rep.rmse_post = window_rmse(pos_hist, stay, t_s, std::min(t_next, t_s + kReportWindowTicks));
        for (std::size_t a = 0; a < N; ++a) {
            double before = 0.0, after = 0.0;
            for (std::uint64_t t = 0; t < t_s && t < angle_hist.size(); ++t) before = std::max(before, angle_hist[t][a]);
            for (std::uint64_t t = t_s; t < t_s + kReportWindowTicks && t < angle_hist.size(); ++t)
                after = std::max(after, angle_hist[t][a]);
            if (after > 1.5 * before) rep.angle_ok = false;
        }
        met.mode_changes.push_back(rep);
    }

    met.rmse_sync = rmse.value();
    met.duty_cycle = duty_cycle_metric(schedules, cfg.network.slots_per_round);
    finish_agents(met, sims);
    return result;
}

} // namespace wncs::detail
