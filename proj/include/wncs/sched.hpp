#pragma once

// Offline slot assignment for periodic flows and the online network manager
// that turns declared control demands into per-round schedules.

#include "wncs/netsim.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <utility>
#include <vector>

namespace wncs {

struct Flow {
    std::uint32_t id = 0;
    NodeId owner{0};
    std::uint32_t period = 1;   // rounds
    std::uint32_t deadline = 1; // rounds, <= period
    std::uint32_t slots_needed = 1;
};

struct ScheduledInstance {
    std::uint32_t flow_id = 0;
    std::uint32_t instance = 0; // k-th release within the hyperperiod
    std::uint32_t round = 0;
    std::uint32_t slot = 0;

    friend bool operator==(const ScheduledInstance&, const ScheduledInstance&) = default;
};

struct StaticSchedule {
    std::uint32_t hyperperiod = 1;
    /// One entry per round of the hyperperiod; only assigned slots are listed.
    std::vector<RoundSchedule> table;
    std::vector<ScheduledInstance> instances;

    const RoundSchedule& at_round(std::uint64_t round) const { return table[round % hyperperiod]; }

    /// Throws ValidationError unless every flow instance is placed exactly once
    /// inside its window, no slot is used twice and no round exceeds B entries.
    void validate(const std::vector<Flow>& flows, std::uint32_t slots_per_round) const;
};

/// Places every flow instance of the hyperperiod (lcm of the periods). Flows
/// are taken by ascending id, each instance at the earliest round and lowest
/// slot that keeps the rest placeable. Returns nullopt when no placement
/// exists. Throws ConfigError if the hyperperiod exceeds `max_hyperperiod`
/// or a flow is malformed.
std::optional<StaticSchedule> synthesize_schedule(const std::vector<Flow>& flows, std::uint32_t slots_per_round,
                                                  std::uint32_t max_hyperperiod);

std::uint64_t hyperperiod_of(const std::vector<Flow>& flows);

enum class ManagerPolicy { energy_saving, reallocate_one_then_sleep };

/// "energy_saving" or "reallocate_one_then_sleep"; throws ConfigError.
ManagerPolicy parse_policy(std::string_view name);
std::string_view to_string(ManagerPolicy p) noexcept;

struct Demand {
    NodeId agent{0};
    /// Rounds after the transmitting round until the next required transmission.
    std::uint32_t next_needed = 1;
};

struct ManagerState {
    /// Agent -> round in which it next needs a slot.
    std::map<NodeId, std::uint64_t> pending;
    std::set<NodeId> lost_last_round;
    ManagerPolicy policy = ManagerPolicy::energy_saving;
    /// Owner recorded for `other` slots.
    NodeId host{0};
    /// Round the next allocation is for.
    std::uint64_t next_round = 0;
    /// Agents granted a control slot in the previous allocation.
    std::set<NodeId> granted_last_round;

    /// Every agent due in round `first_round`.
    static ManagerState initial(const std::set<NodeId>& agents, ManagerPolicy policy, NodeId host,
                                std::uint64_t first_round = 0);
};

/// Schedule for round state.next_round.
///
/// `received_demands` arrived in the previous round; each sets the agent's due
/// round to (previous round + M). `losses` are agents granted a slot in the
/// previous round whose message did not reach the manager; they get a slot
/// again. Control slots are handed out by ascending agent id. All B slots are
/// listed: spare slots are off, except that reallocate_one_then_sleep turns
/// the first spare slot into an `other` slot owned by the host.
///
/// Throws OverloadError if more than B agents need a slot and ContractError if
/// a loss names an agent without a slot in the previous round.
std::pair<RoundSchedule, ManagerState> manager_allocate(ManagerState state, const std::vector<Demand>& received_demands,
                                                        const std::set<NodeId>& losses, std::uint32_t slots_per_round);

struct DutyCycle {
    double control = 0.0;
    double other = 0.0;
    double off = 0.0;
    /// Fraction of slots with an active radio (control + other).
    double energy = 0.0;
};

/// Fractions over rounds.size() * B slots; unlisted slots count as off.
DutyCycle duty_cycle_metric(const std::vector<RoundSchedule>& rounds, std::uint32_t slots_per_round);

} // namespace wncs
