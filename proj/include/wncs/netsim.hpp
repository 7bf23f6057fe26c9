#pragma once

// Round-based wireless network abstraction.
//
// Every round starts with a beacon flood from the host, followed by the data
// slots listed in the beacon's schedule. Each flood reaches each receiver
// independently with probability 1 - loss. A node that misses the beacon sleeps
// through the round: it neither transmits nor receives data. Deliveries become
// visible to controllers at the start of the next round.

#include "wncs/linalg.hpp"
#include "wncs/rng.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <variant>
#include <vector>

namespace wncs {

enum class NodeId : std::uint32_t {};
enum class ModeId : std::uint32_t {};

constexpr std::uint32_t to_int(NodeId id) noexcept { return static_cast<std::uint32_t>(id); }
constexpr std::uint32_t to_int(ModeId id) noexcept { return static_cast<std::uint32_t>(id); }

struct NetworkConfig {
    std::set<NodeId> node_ids;
    NodeId host_id{0};
    double loss_prob = 0.0;
    /// Overrides loss_prob for beacon floods when set.
    std::optional<double> beacon_loss_prob;
    /// One Bernoulli draw per flood instead of one per (flood, receiver).
    bool per_flood_loss = false;
    std::uint32_t slots_per_round = 1;
    std::uint32_t round_period = 1; // ticks
    /// Length of a mode-switch announcement window in rounds.
    std::uint32_t switch_window = 3;

    double beacon_loss() const noexcept { return beacon_loss_prob.value_or(loss_prob); }

    /// Throws ValidationError listing every violated invariant.
    void validate() const;
};

enum class SlotPurpose { control, other, off };

std::string_view to_string(SlotPurpose p) noexcept;

struct SlotAssignment {
    std::uint32_t slot_index = 0;
    NodeId owner{0};
    SlotPurpose purpose = SlotPurpose::off;

    friend bool operator==(const SlotAssignment&, const SlotAssignment&) = default;
};

struct RoundSchedule {
    std::vector<SlotAssignment> assignments;

    /// Slot owned by `node` with purpose control or other, if any.
    std::optional<SlotAssignment> slot_of(NodeId node) const;
    /// Throws ValidationError on duplicate slots or too many entries.
    void validate(std::uint32_t slots_per_round) const;

    friend bool operator==(const RoundSchedule&, const RoundSchedule&) = default;
};

struct StatePayload { Vec value; };
struct InputPayload { Vec value; };
struct DesiredPayload { Vec value; };
struct OtherTraffic {};

using Payload = std::variant<StatePayload, InputPayload, DesiredPayload, OtherTraffic>;

struct Message {
    NodeId sender{0};
    std::uint64_t round_index = 0;
    std::uint32_t slot_index = 0;
    Payload payload = OtherTraffic{};
    std::optional<std::uint32_t> demand; // rounds until the next required slot
    std::uint64_t seq = 0;               // per-sender, strictly increasing
};

struct Beacon {
    ModeId current_mode{0};
    ModeId next_mode{0};
    std::uint32_t countdown = 0;
    std::uint64_t round_index = 0;
    RoundSchedule round_schedule;
};

struct NodeNetState {
    bool synced = true;
    ModeId known_mode{0};
    std::uint32_t missed_beacons = 0; // consecutive
    /// Pending switch learned from a beacon and the rounds left until it.
    std::optional<ModeId> pending_mode;
    std::uint32_t pending_countdown = 0;
    /// Beacons missed inside the current switch window.
    std::uint32_t window_missed = 0;
};

/// Advances the beacon by one round. A countdown reaching zero makes the next
/// mode current.
Beacon mode_change_tick(const Beacon& beacon);

/// Per-round update of a node's synchronization state.
///
/// The node first advances any pending switch it already knows about, then
/// applies the received beacon (authoritative for mode and countdown). Missing
/// every beacon of a switch window (`window_length` beacons while
/// `switch_window_active`) desynchronizes the node; any later beacon
/// resynchronizes it in the beacon's current mode.
NodeNetState node_resync_policy(NodeNetState state, const std::optional<Beacon>& beacon_received,
                                bool switch_window_active, std::uint32_t window_length);

struct Delivery {
    NodeId receiver{0};
    NodeId sender{0};
    std::uint64_t seq = 0;
};

struct RoundResult {
    std::map<NodeId, std::vector<Message>> inboxes;
    std::map<NodeId, NodeNetState> node_states;
    /// Nodes that heard this round's beacon (the host always does).
    std::set<NodeId> beacon_receivers;
    /// Messages actually flooded (sender was awake and synced).
    std::vector<Message> flooded;
    std::vector<Delivery> deliveries;
};

/// Executes one communication round.
///
/// Outbox entries must come from nodes owning a control/other slot in
/// `beacon.round_schedule` and must name that slot; anything else throws
/// ProtocolError. Entries from nodes that are unsynced or miss this beacon are
/// not flooded. A beacon with a nonzero countdown marks the round as part of a
/// switch window for node_resync_policy.
RoundResult run_round(const NetworkConfig& cfg, const Beacon& beacon,
                      const std::map<NodeId, Message>& outbox,
                      std::map<NodeId, NodeNetState> node_states, Rng& rng);

/// P4 audit: for every (sender, receiver) pair, delivered sequence numbers are
/// strictly increasing. Returns false on the first violation.
bool deliveries_in_order(const std::vector<Delivery>& deliveries);

} // namespace wncs
