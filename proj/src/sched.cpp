#include "wncs/sched.hpp"

#include "wncs/errors.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace wncs {

std::uint64_t hyperperiod_of(const std::vector<Flow>& flows) {
    std::uint64_t h = 1;
    for (const auto& f : flows) {
        if (f.period == 0) throw ConfigError("flow " + std::to_string(f.id) + ": period must be positive");
        h = std::lcm(h, static_cast<std::uint64_t>(f.period));
        if (h > (1ULL << 40)) break;
    }
    return h;
}

void StaticSchedule::validate(const std::vector<Flow>& flows, std::uint32_t slots_per_round) const {
    std::vector<std::string> bad;
    if (table.size() != hyperperiod) bad.emplace_back("schedule: table length differs from hyperperiod");
    for (std::size_t r = 0; r < table.size(); ++r) {
        const auto& rs = table[r];
        if (rs.assignments.size() > slots_per_round)
            bad.emplace_back("schedule: round " + std::to_string(r) + " exceeds slots_per_round");
        std::set<std::uint32_t> seen;
        for (const auto& a : rs.assignments) {
            if (a.slot_index >= slots_per_round || !seen.insert(a.slot_index).second)
                bad.emplace_back("schedule: round " + std::to_string(r) + " has an invalid or repeated slot");
        }
    }
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> count;
    for (const auto& inst : instances) {
        ++count[{inst.flow_id, inst.instance}];
        auto it = std::find_if(flows.begin(), flows.end(), [&](const Flow& f) { return f.id == inst.flow_id; });
        if (it == flows.end()) {
            bad.emplace_back("schedule: unknown flow " + std::to_string(inst.flow_id));
            continue;
        }
        const std::uint64_t lo = static_cast<std::uint64_t>(inst.instance) * it->period;
        if (inst.round < lo || inst.round >= lo + it->deadline)
            bad.emplace_back("schedule: flow " + std::to_string(inst.flow_id) + " instance " +
                             std::to_string(inst.instance) + " misses its window");
        if (inst.round < table.size()) {
            const auto& as = table[inst.round].assignments;
            const bool listed = std::any_of(as.begin(), as.end(), [&](const SlotAssignment& a) {
                return a.slot_index == inst.slot && a.owner == it->owner && a.purpose == SlotPurpose::control;
            });
            if (!listed) bad.emplace_back("schedule: instance not reflected in the round table");
        }
    }
    for (const auto& f : flows) {
        if (f.period == 0 || hyperperiod % f.period != 0) {
            bad.emplace_back("schedule: hyperperiod is not a multiple of flow " + std::to_string(f.id) + "'s period");
            continue;
        }
        for (std::uint32_t k = 0; k < hyperperiod / f.period; ++k)
            if (count[{f.id, k}] != 1)
                bad.emplace_back("schedule: flow " + std::to_string(f.id) + " instance " + std::to_string(k) +
                                 " placed " + std::to_string(count[{f.id, k}]) + " times");
    }
    std::size_t total = 0;
    for (const auto& rs : table) total += rs.assignments.size();
    if (total != instances.size()) bad.emplace_back("schedule: table lists slots without a flow instance");
    if (!bad.empty()) throw ValidationError(std::move(bad));
}

namespace {

struct Job {
    std::uint32_t flow_id;
    NodeId owner;
    std::uint32_t instance;
    std::uint32_t lo, hi; // inclusive window
};

class Placer {
public:
    Placer(std::vector<Job> jobs, std::uint32_t H, std::uint32_t B)
        : jobs_(std::move(jobs)), used_(H, 0), B_(B), round_of_(jobs_.size(), 0), placed_(jobs_.size(), false) {
        by_lo_.resize(jobs_.size());
        std::iota(by_lo_.begin(), by_lo_.end(), std::size_t{0});
        std::stable_sort(by_lo_.begin(), by_lo_.end(), [&](std::size_t a, std::size_t b) { return jobs_[a].lo < jobs_[b].lo; });
        by_hi_ = by_lo_;
        std::stable_sort(by_hi_.begin(), by_hi_.end(), [&](std::size_t a, std::size_t b) { return jobs_[a].hi < jobs_[b].hi; });
    }

    bool solve(std::size_t idx) {
        if (idx == jobs_.size()) return true;
        const Job& j = jobs_[idx];
        for (std::uint32_t r = j.lo; r <= j.hi; ++r) {
            if (used_[r] >= B_) continue;
            ++used_[r];
            placed_[idx] = true;
            round_of_[idx] = r;
            if (hall_ok() && solve(idx + 1)) return true;
            placed_[idx] = false;
            --used_[r];
        }
        return false;
    }

    /// Every interval [a, b] has enough free slots for the unplaced jobs whose
    /// window lies inside it. Necessary and, for interval windows, sufficient.
    bool hall_ok() const {
        std::vector<std::uint64_t> prefix(used_.size() + 1, 0);
        for (std::size_t r = 0; r < used_.size(); ++r) prefix[r + 1] = prefix[r] + (B_ - used_[r]);
        std::uint32_t last_a = UINT32_MAX;
        for (std::size_t ia : by_lo_) {
            if (placed_[ia]) continue;
            const std::uint32_t a = jobs_[ia].lo;
            if (a == last_a) continue;
            last_a = a;
            std::uint64_t count = 0;
            for (std::size_t k = 0; k < by_hi_.size(); ++k) {
                const std::size_t ib = by_hi_[k];
                if (!placed_[ib] && jobs_[ib].lo >= a) ++count;
                const std::uint32_t b = jobs_[ib].hi;
                if (b < a) continue;
                const bool last_with_b =
                    k + 1 == by_hi_.size() || jobs_[by_hi_[k + 1]].hi != b;
                if (last_with_b && count > prefix[b + 1] - prefix[a]) return false;
            }
        }
        return true;
    }

    const std::vector<Job>& jobs() const { return jobs_; }
    std::uint32_t round_of(std::size_t i) const { return round_of_[i]; }

private:
    std::vector<Job> jobs_;
    std::vector<std::uint32_t> used_;
    std::uint32_t B_;
    std::vector<std::uint32_t> round_of_;
    std::vector<bool> placed_;
    std::vector<std::size_t> by_lo_, by_hi_;
};

} // namespace

std::optional<StaticSchedule> synthesize_schedule(const std::vector<Flow>& flows, std::uint32_t slots_per_round,
                                                  std::uint32_t max_hyperperiod) {
    if (flows.empty()) throw ConfigError("synthesize_schedule: no flows");
    if (slots_per_round == 0) throw ConfigError("synthesize_schedule: slots_per_round must be positive");
    std::vector<std::string> bad;
    std::set<std::uint32_t> ids;
    for (const auto& f : flows) {
        const std::string tag = "flow " + std::to_string(f.id);
        if (!ids.insert(f.id).second) bad.push_back(tag + ": duplicate id");
        if (f.period == 0) bad.push_back(tag + ": period must be positive");
        if (f.deadline == 0 || f.deadline > f.period) bad.push_back(tag + ": deadline must be in [1, period]");
        if (f.slots_needed != 1) bad.push_back(tag + ": slots_needed must be 1");
    }
    if (!bad.empty()) throw ValidationError(std::move(bad));
    const std::uint64_t H = hyperperiod_of(flows);
    if (H > max_hyperperiod)
        throw ConfigError("synthesize_schedule: hyperperiod " + std::to_string(H) + " exceeds maximum " +
                          std::to_string(max_hyperperiod));

    std::vector<Flow> sorted = flows;
    std::sort(sorted.begin(), sorted.end(), [](const Flow& a, const Flow& b) { return a.id < b.id; });
    std::vector<Job> jobs;
    for (const auto& f : sorted)
        for (std::uint32_t k = 0; k < H / f.period; ++k)
            jobs.push_back({f.id, f.owner, k, k * f.period, k * f.period + f.deadline - 1});

    Placer placer(std::move(jobs), static_cast<std::uint32_t>(H), slots_per_round);
    if (!placer.hall_ok() || !placer.solve(0)) return std::nullopt;

    StaticSchedule s;
    s.hyperperiod = static_cast<std::uint32_t>(H);
    s.table.resize(H);
    for (std::size_t i = 0; i < placer.jobs().size(); ++i) {
        const Job& j = placer.jobs()[i];
        const std::uint32_t r = placer.round_of(i);
        auto& as = s.table[r].assignments;
        const auto slot = static_cast<std::uint32_t>(as.size());
        as.push_back({slot, j.owner, SlotPurpose::control});
        s.instances.push_back({j.flow_id, j.instance, r, slot});
    }
    return s;
}

ManagerPolicy parse_policy(std::string_view name) {
    if (name == "energy_saving") return ManagerPolicy::energy_saving;
    if (name == "reallocate_one_then_sleep") return ManagerPolicy::reallocate_one_then_sleep;
    throw ConfigError("unknown manager policy '" + std::string(name) + "'");
}

std::string_view to_string(ManagerPolicy p) noexcept {
    return p == ManagerPolicy::energy_saving ? "energy_saving" : "reallocate_one_then_sleep";
}

ManagerState ManagerState::initial(const std::set<NodeId>& agents, ManagerPolicy policy, NodeId host,
                                   std::uint64_t first_round) {
    ManagerState s;
    for (NodeId a : agents) s.pending[a] = first_round;
    s.policy = policy;
    s.host = host;
    s.next_round = first_round;
    return s;
}

std::pair<RoundSchedule, ManagerState> manager_allocate(ManagerState state, const std::vector<Demand>& received_demands,
                                                        const std::set<NodeId>& losses, std::uint32_t slots_per_round) {
    for (NodeId a : losses)
        if (!state.granted_last_round.contains(a))
            throw ContractError("manager_allocate: loss reported for agent " + std::to_string(to_int(a)) +
                                " that had no slot");
    const std::uint64_t round = state.next_round;
    const std::uint64_t previous = round == 0 ? 0 : round - 1;
    for (const auto& d : received_demands) {
        if (d.next_needed < 1) throw ContractError("manager_allocate: demand must be >= 1");
        state.pending[d.agent] = previous + d.next_needed;
    }

    std::set<NodeId> grant(losses);
    for (const auto& [agent, due] : state.pending)
        if (due <= round) grant.insert(agent);
    if (grant.size() > slots_per_round)
        throw OverloadError("manager_allocate: " + std::to_string(grant.size()) + " control slots needed in round " +
                            std::to_string(round) + " but only " + std::to_string(slots_per_round) + " available");

    RoundSchedule rs;
    std::uint32_t slot = 0;
    for (NodeId a : grant) rs.assignments.push_back({slot++, a, SlotPurpose::control});
    bool other_given = false;
    for (; slot < slots_per_round; ++slot) {
        if (state.policy == ManagerPolicy::reallocate_one_then_sleep && !other_given) {
            rs.assignments.push_back({slot, state.host, SlotPurpose::other});
            other_given = true;
        } else {
            rs.assignments.push_back({slot, state.host, SlotPurpose::off});
        }
    }
    state.lost_last_round = losses;
    state.granted_last_round = std::move(grant);
    state.next_round = round + 1;
    return {std::move(rs), std::move(state)};
}

DutyCycle duty_cycle_metric(const std::vector<RoundSchedule>& rounds, std::uint32_t slots_per_round) {
    DutyCycle d;
    const double total = static_cast<double>(rounds.size()) * slots_per_round;
    if (total == 0.0) return d;
    double c = 0, o = 0;
    for (const auto& rs : rounds)
        for (const auto& a : rs.assignments) {
            if (a.purpose == SlotPurpose::control) ++c;
            else if (a.purpose == SlotPurpose::other) ++o;
        }
    d.control = c / total;
    d.other = o / total;
    d.off = 1.0 - d.control - d.other;
    d.energy = d.control + d.other;
    return d;
}

} // namespace wncs
