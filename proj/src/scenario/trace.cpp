#include "common.hpp"

#include <array>
#include <charconv>

namespace wncs {

namespace {

void put_double(std::string& s, double v) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    s.append(buf.data(), ec == std::errc() ? end : buf.data());
}

void put_uint(std::string& s, std::uint64_t v) {
    std::array<char, 24> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    s.append(buf.data(), ec == std::errc() ? end : buf.data());
}

char purpose_code(SlotPurpose p) {
    switch (p) {
    case SlotPurpose::control: return 'c';
    case SlotPurpose::other: return 'o';
    case SlotPurpose::off: return 'x';
    }
    return 'x';
}

} // namespace

std::string format_trace_row(const TraceRecord& r) {
    std::string s;
    s.reserve(160);
    put_uint(s, r.tick);
    s += ',';
    put_uint(s, r.round);
    s += ',';
    put_uint(s, r.agent);
    for (Eigen::Index i = 0; i < 4; ++i) {
        s += ',';
        if (i < r.x.size()) put_double(s, r.x(i));
    }
    s += ',';
    for (Eigen::Index i = 0; i < r.u.size(); ++i) {
        if (i) s += ';';
        put_double(s, r.u(i));
    }
    s += ',';
    if (r.x_des) put_double(s, *r.x_des);
    s += ',';
    if (r.slot) s += to_string(*r.slot);
    s += ',';
    if (r.theta) s += *r.theta ? '1' : '0';
    s += ',';
    if (r.phi) s += *r.phi ? '1' : '0';
    s += ',';
    put_uint(s, r.mode);
    return s;
}

std::string format_round_row(const RoundLog& r) {
    std::string s;
    put_uint(s, r.round);
    s += ',';
    put_uint(s, r.current_mode);
    s += ',';
    put_uint(s, r.next_mode);
    s += ',';
    put_uint(s, r.countdown);
    s += ',';
    for (std::size_t i = 0; i < r.schedule.assignments.size(); ++i) {
        const auto& a = r.schedule.assignments[i];
        if (i) s += ';';
        put_uint(s, a.slot_index);
        s += ':';
        s += purpose_code(a.purpose);
        s += ':';
        put_uint(s, to_int(a.owner));
    }
    s += ',';
    for (std::size_t i = 0; i < r.beacon_receivers.size(); ++i) {
        if (i) s += ';';
        put_uint(s, to_int(r.beacon_receivers[i]));
    }
    s += ',';
    for (std::size_t i = 0; i < r.flooded.size(); ++i) {
        if (i) s += ';';
        put_uint(s, to_int(r.flooded[i].first));
        if (r.flooded[i].second) {
            s += ':';
            put_uint(s, r.flooded[i].second);
        }
    }
    s += ',';
    for (std::size_t i = 0; i < r.deliveries.size(); ++i) {
        const auto& d = r.deliveries[i];
        if (i) s += ';';
        put_uint(s, to_int(d.sender));
        s += '>';
        put_uint(s, to_int(d.receiver));
        s += '#';
        put_uint(s, d.seq);
    }
    return s;
}

namespace detail {

RoundLog make_round_log(const Beacon& beacon, const RoundResult& rr, std::size_t agents) {
    RoundLog log;
    log.round = beacon.round_index;
    log.current_mode = to_int(beacon.current_mode);
    log.next_mode = to_int(beacon.next_mode);
    log.countdown = beacon.countdown;
    log.schedule = beacon.round_schedule;
    log.beacon_receivers.assign(rr.beacon_receivers.begin(), rr.beacon_receivers.end());
    for (const auto& msg : rr.flooded) log.flooded.emplace_back(msg.sender, msg.demand.value_or(0));
    log.deliveries = rr.deliveries;
    for (std::size_t a = 0; a < agents; ++a) {
        const auto& st = rr.node_states.at(agent_node(a));
        log.agent_sync.emplace_back(st.synced, to_int(st.known_mode));
    }
    return log;
}

} // namespace detail

} // namespace wncs
