#include "wncs/netsim.hpp"

#include "wncs/errors.hpp"

#include <algorithm>
#include <string>

namespace wncs {

void NetworkConfig::validate() const {
    std::vector<std::string> v;
    if (node_ids.empty()) v.emplace_back("network: node_ids is empty");
    if (!node_ids.contains(host_id)) v.emplace_back("network: host_id " + std::to_string(to_int(host_id)) + " is not a node");
    if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) v.emplace_back("network: loss_prob must lie in [0, 1]");
    if (beacon_loss_prob && !(*beacon_loss_prob >= 0.0 && *beacon_loss_prob <= 1.0))
        v.emplace_back("network: beacon_loss_prob must lie in [0, 1]");
    if (slots_per_round < 1) v.emplace_back("network: slots_per_round must be positive");
    if (round_period < 1) v.emplace_back("network: round_period must be positive");
    if (switch_window < 1) v.emplace_back("network: switch_window must be positive");
    if (!v.empty()) throw ValidationError(std::move(v));
}

std::string_view to_string(SlotPurpose p) noexcept {
    switch (p) {
    case SlotPurpose::control: return "control";
    case SlotPurpose::other: return "other";
    case SlotPurpose::off: return "off";
    }
    return "off";
}

std::optional<SlotAssignment> RoundSchedule::slot_of(NodeId node) const {
    for (const auto& a : assignments) {
        if (a.owner == node && a.purpose != SlotPurpose::off) return a;
    }
    return std::nullopt;
}

void RoundSchedule::validate(std::uint32_t slots_per_round) const {
    std::vector<std::string> v;
    if (assignments.size() > slots_per_round) {
        v.emplace_back("schedule: " + std::to_string(assignments.size()) + " assignments exceed " +
                       std::to_string(slots_per_round) + " slots");
    }
    std::set<std::uint32_t> seen;
    for (const auto& a : assignments) {
        if (a.slot_index >= slots_per_round) v.emplace_back("schedule: slot index " + std::to_string(a.slot_index) + " out of range");
        if (!seen.insert(a.slot_index).second) v.emplace_back("schedule: slot " + std::to_string(a.slot_index) + " double-booked");
    }
    if (!v.empty()) throw ValidationError(std::move(v));
}

Beacon mode_change_tick(const Beacon& beacon) {
    Beacon next = beacon;
    next.round_index = beacon.round_index + 1;
    if (next.countdown > 0) {
        --next.countdown;
        if (next.countdown == 0) next.current_mode = next.next_mode;
    }
    return next;
}

NodeNetState node_resync_policy(NodeNetState state, const std::optional<Beacon>& beacon_received,
                                bool switch_window_active, std::uint32_t window_length) {
    if (state.pending_mode) {
        if (state.pending_countdown > 0) --state.pending_countdown;
        if (state.pending_countdown == 0) {
            state.known_mode = *state.pending_mode;
            state.pending_mode.reset();
        }
    }
    if (beacon_received) {
        const Beacon& b = *beacon_received;
        state.synced = true;
        state.missed_beacons = 0;
        state.window_missed = 0;
        state.known_mode = b.current_mode;
        if (b.countdown > 0) {
            state.pending_mode = b.next_mode;
            state.pending_countdown = b.countdown;
        } else {
            state.pending_mode.reset();
            state.pending_countdown = 0;
        }
        return state;
    }
    ++state.missed_beacons;
    if (switch_window_active) {
        ++state.window_missed;
        if (state.synced && state.window_missed >= window_length) {
            state.synced = false;
            state.pending_mode.reset();
            state.pending_countdown = 0;
        }
    } else {
        state.window_missed = 0;
    }
    return state;
}

RoundResult run_round(const NetworkConfig& cfg, const Beacon& beacon,
                      const std::map<NodeId, Message>& outbox,
                      std::map<NodeId, NodeNetState> node_states, Rng& rng) {
    for (const auto& [node, msg] : outbox) {
        const auto slot = beacon.round_schedule.slot_of(node);
        if (!slot) {
            throw ProtocolError("node " + std::to_string(to_int(node)) + " transmitted in round " +
                                std::to_string(beacon.round_index) + " without owning a slot");
        }
        if (msg.sender != node || msg.slot_index != slot->slot_index) {
            throw ProtocolError("node " + std::to_string(to_int(node)) + " transmitted in slot " +
                                std::to_string(msg.slot_index) + " but owns slot " + std::to_string(slot->slot_index));
        }
    }

    RoundResult result;
    const bool window_active = beacon.countdown > 0;

    // beacon flood
    const bool beacon_flood_lost = cfg.per_flood_loss && rng.bernoulli(cfg.beacon_loss());
    for (const NodeId node : cfg.node_ids) {
        NodeNetState st = node_states.contains(node) ? node_states.at(node) : NodeNetState{};
        bool got = true;
        if (node != cfg.host_id) {
            got = cfg.per_flood_loss ? !beacon_flood_lost : !rng.bernoulli(cfg.beacon_loss());
        }
        st = node_resync_policy(st, got ? std::optional<Beacon>(beacon) : std::nullopt, window_active,
                                cfg.switch_window);
        if (got) result.beacon_receivers.insert(node);
        result.node_states[node] = st;
        result.inboxes[node];
    }

    auto awake = [&](NodeId node) {
        return result.beacon_receivers.contains(node) && result.node_states.at(node).synced;
    };

    // data slots in slot order
    std::vector<SlotAssignment> slots = beacon.round_schedule.assignments;
    std::sort(slots.begin(), slots.end(),
              [](const SlotAssignment& a, const SlotAssignment& b) { return a.slot_index < b.slot_index; });
    for (const auto& slot : slots) {
        if (slot.purpose == SlotPurpose::off) continue;
        const auto it = outbox.find(slot.owner);
        if (it == outbox.end() || !awake(slot.owner)) continue;
        const Message& msg = it->second;
        result.flooded.push_back(msg);
        const bool flood_lost = cfg.per_flood_loss && rng.bernoulli(cfg.loss_prob);
        for (const NodeId rx : cfg.node_ids) {
            if (rx == slot.owner || !awake(rx)) continue;
            const bool delivered = cfg.per_flood_loss ? !flood_lost : !rng.bernoulli(cfg.loss_prob);
            if (!delivered) continue;
            result.inboxes[rx].push_back(msg);
            result.deliveries.push_back(Delivery{rx, msg.sender, msg.seq});
        }
    }
    return result;
}

bool deliveries_in_order(const std::vector<Delivery>& deliveries) {
    std::map<std::pair<NodeId, NodeId>, std::uint64_t> last;
    for (const auto& d : deliveries) {
        const auto key = std::make_pair(d.sender, d.receiver);
        const auto it = last.find(key);
        if (it != last.end() && d.seq <= it->second) return false;
        last[key] = d.seq;
    }
    return true;
}

} // namespace wncs
