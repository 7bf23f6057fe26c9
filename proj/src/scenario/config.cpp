#include "wncs/scenario.hpp"

#include "wncs/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace wncs {

using nlohmann::json;

ScenarioKind parse_scenario_kind(std::string_view name) {
    if (name == "remote") return ScenarioKind::remote;
    if (name == "remote_drops") return ScenarioKind::remote_drops;
    if (name == "consensus") return ScenarioKind::consensus;
    if (name == "sync_modes") return ScenarioKind::sync_modes;
    if (name == "self_triggered") return ScenarioKind::self_triggered;
    throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

std::string_view to_string(ScenarioKind k) noexcept {
    switch (k) {
    case ScenarioKind::remote: return "remote";
    case ScenarioKind::remote_drops: return "remote_drops";
    case ScenarioKind::consensus: return "consensus";
    case ScenarioKind::sync_modes: return "sync_modes";
    case ScenarioKind::self_triggered: return "self_triggered";
    }
    return "remote";
}

namespace {

class Reader {
public:
    std::vector<std::string> errors;

    void keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& path) {
        for (const auto& [k, v] : obj.items()) {
            if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
                errors.push_back(path + ": unknown key '" + k + "'");
        }
    }

    bool is_object(const json& j, const std::string& path) {
        if (j.is_object()) return true;
        errors.push_back(path + ": expected an object");
        return false;
    }

    template <class T>
    void number(const json& obj, const char* key, T& out, const std::string& path) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        const std::string where = path + "." + key;
        if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() &&
                                           v.get<std::int64_t>() < 0)) {
                errors.push_back(where + ": expected a nonnegative integer");
                return;
            }
            out = v.get<T>();
        } else {
            if (!v.is_number()) {
                errors.push_back(where + ": expected a number");
                return;
            }
            out = v.get<T>();
        }
    }

    void boolean(const json& obj, const char* key, bool& out, const std::string& path) {
        if (!obj.contains(key)) return;
        if (!obj.at(key).is_boolean()) {
            errors.push_back(path + "." + key + ": expected true or false");
            return;
        }
        out = obj.at(key).get<bool>();
    }

    void string(const json& obj, const char* key, std::string& out, const std::string& path) {
        if (!obj.contains(key)) return;
        if (!obj.at(key).is_string()) {
            errors.push_back(path + "." + key + ": expected a string");
            return;
        }
        out = obj.at(key).get<std::string>();
    }

    std::optional<Vec> vector(const json& v, const std::string& path) {
        if (!v.is_array()) {
            errors.push_back(path + ": expected an array of numbers");
            return std::nullopt;
        }
        Vec out(static_cast<Eigen::Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) {
                errors.push_back(path + ": expected an array of numbers");
                return std::nullopt;
            }
            out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
        }
        return out;
    }

    std::optional<Mat> matrix(const json& v, const std::string& path) {
        if (v.is_object()) {
            keys(v, {"diag"}, path);
            if (!v.contains("diag")) {
                errors.push_back(path + ": matrix object needs 'diag'");
                return std::nullopt;
            }
            auto d = vector(v.at("diag"), path + ".diag");
            if (!d) return std::nullopt;
            return Mat(d->asDiagonal());
        }
        if (!v.is_array() || v.empty() || !v[0].is_array()) {
            errors.push_back(path + ": expected a nested array or {\"diag\": [...]}");
            return std::nullopt;
        }
        const std::size_t rows = v.size(), cols = v[0].size();
        Mat out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t r = 0; r < rows; ++r) {
            if (!v[r].is_array() || v[r].size() != cols) {
                errors.push_back(path + ": rows must have equal length");
                return std::nullopt;
            }
            for (std::size_t c = 0; c < cols; ++c) {
                if (!v[r][c].is_number()) {
                    errors.push_back(path + ": entries must be numbers");
                    return std::nullopt;
                }
                out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r][c].get<double>();
            }
        }
        return out;
    }

    void matrix(const json& obj, const char* key, std::optional<Mat>& out, const std::string& path) {
        if (obj.contains(key)) out = matrix(obj.at(key), path + "." + key);
    }

    void matrix(const json& obj, const char* key, Mat& out, const std::string& path) {
        if (!obj.contains(key)) return;
        if (auto m = matrix(obj.at(key), path + "." + key)) out = *m;
    }

    void index_list(const json& obj, const char* key, std::vector<std::size_t>& out, const std::string& path) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (!v.is_array()) {
            errors.push_back(path + "." + key + ": expected an array of agent indices");
            return;
        }
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number_unsigned()) {
                errors.push_back(path + "." + key + ": expected an array of agent indices");
                return;
            }
            out.push_back(e.get<std::size_t>());
        }
    }
};

json matrix_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

json vector_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

} // namespace

ScenarioConfig parse_config(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text.begin(), json_text.end());
    } catch (const json::parse_error& e) {
        throw ValidationError({std::string("config: malformed JSON: ") + e.what()});
    }
    Reader rd;
    ScenarioConfig cfg;
    if (!rd.is_object(doc, "config")) throw ValidationError(rd.errors);
    rd.keys(doc,
            {"scenario", "seed", "duration", "network", "agents", "controller", "modes", "process_noise",
             "measurement_noise", "artificial_drop", "drop_agents", "dwell_enforcement"},
            "config");

    if (!doc.contains("scenario") || !doc.at("scenario").is_string()) {
        rd.errors.emplace_back("config.scenario: required string");
    } else {
        try {
            cfg.scenario = parse_scenario_kind(doc.at("scenario").get<std::string>());
        } catch (const ConfigError& e) {
            rd.errors.emplace_back(std::string("config.scenario: ") + e.what());
        }
    }
    rd.number(doc, "seed", cfg.seed, "config");
    if (!doc.contains("duration")) rd.errors.emplace_back("config.duration: required");
    rd.number(doc, "duration", cfg.duration, "config");
    rd.number(doc, "artificial_drop", cfg.artificial_drop, "config");
    rd.index_list(doc, "drop_agents", cfg.drop_agents, "config");
    rd.boolean(doc, "dwell_enforcement", cfg.dwell_enforcement, "config");
    rd.matrix(doc, "process_noise", cfg.process_noise, "config");
    rd.matrix(doc, "measurement_noise", cfg.measurement_noise, "config");

    if (doc.contains("network") && rd.is_object(doc.at("network"), "config.network")) {
        const json& n = doc.at("network");
        const std::string p = "config.network";
        rd.keys(n,
                {"loss_prob", "beacon_loss_prob", "per_flood_loss", "slots_per_round", "round_period",
                 "switch_window", "max_hyperperiod"},
                p);
        rd.number(n, "loss_prob", cfg.network.loss_prob, p);
        if (n.contains("beacon_loss_prob")) {
            double b = 0.0;
            rd.number(n, "beacon_loss_prob", b, p);
            cfg.network.beacon_loss_prob = b;
        }
        rd.boolean(n, "per_flood_loss", cfg.network.per_flood_loss, p);
        rd.number(n, "slots_per_round", cfg.network.slots_per_round, p);
        rd.number(n, "round_period", cfg.network.round_period, p);
        rd.number(n, "switch_window", cfg.network.switch_window, p);
        rd.number(n, "max_hyperperiod", cfg.network.max_hyperperiod, p);
    }

    if (!doc.contains("agents") || !doc.at("agents").is_array()) {
        rd.errors.emplace_back("config.agents: required array");
    } else {
        std::size_t i = 0;
        for (const auto& a : doc.at("agents")) {
            const std::string p = "config.agents[" + std::to_string(i++) + "]";
            AgentConfig ac;
            if (rd.is_object(a, p)) {
                rd.keys(a, {"preset", "A", "B", "x0"}, p);
                rd.string(a, "preset", ac.preset, p);
                rd.matrix(a, "A", ac.A, p);
                rd.matrix(a, "B", ac.B, p);
                if (a.contains("x0")) {
                    if (auto v = rd.vector(a.at("x0"), p + ".x0")) ac.x0 = *v;
                }
            }
            cfg.agents.push_back(std::move(ac));
        }
    }

    if (doc.contains("controller") && rd.is_object(doc.at("controller"), "config.controller")) {
        const json& c = doc.at("controller");
        const std::string p = "config.controller";
        auto& cc = cfg.controller;
        rd.keys(c,
                {"F", "Q", "R", "sync_Q", "sync_R", "Q_sync", "topology", "consensus_weights", "rule",
                 "agreement_tol", "agreement_rounds", "track_gain", "integrator_gain", "delta", "max_horizon",
                 "policy"},
                p);
        rd.matrix(c, "F", cc.F, p);
        rd.matrix(c, "Q", cc.Q, p);
        rd.matrix(c, "R", cc.R, p);
        rd.matrix(c, "sync_Q", cc.sync_Q, p);
        rd.matrix(c, "sync_R", cc.sync_R, p);
        rd.matrix(c, "Q_sync", cc.Q_sync, p);
        rd.string(c, "topology", cc.topology, p);
        rd.matrix(c, "consensus_weights", cc.consensus_weights, p);
        if (c.contains("rule")) {
            std::string rule;
            rd.string(c, "rule", rule, p);
            if (rule == "complete") cc.rule = AgreementRule::complete;
            else if (rule == "detector") cc.rule = AgreementRule::detector;
            else rd.errors.push_back(p + ".rule: expected 'complete' or 'detector'");
        }
        rd.number(c, "agreement_tol", cc.agreement_tol, p);
        rd.number(c, "agreement_rounds", cc.agreement_rounds, p);
        rd.number(c, "track_gain", cc.track_gain, p);
        rd.number(c, "integrator_gain", cc.integrator_gain, p);
        rd.number(c, "delta", cc.delta, p);
        rd.number(c, "max_horizon", cc.max_horizon, p);
        if (c.contains("policy")) {
            std::string pol;
            rd.string(c, "policy", pol, p);
            try {
                cc.policy = parse_policy(pol);
            } catch (const ConfigError& e) {
                rd.errors.push_back(p + ".policy: " + e.what());
            }
        }
    }

    if (doc.contains("modes")) {
        if (!doc.at("modes").is_array()) {
            rd.errors.emplace_back("config.modes: expected an array");
        } else {
            std::size_t i = 0;
            for (const auto& m : doc.at("modes")) {
                const std::string p = "config.modes[" + std::to_string(i++) + "]";
                ModeConfig mc;
                if (rd.is_object(m, p)) {
                    rd.keys(m, {"id", "at_tick", "team"}, p);
                    rd.number(m, "id", mc.id, p);
                    rd.number(m, "at_tick", mc.at_tick, p);
                    rd.index_list(m, "team", mc.team, p);
                }
                cfg.modes.push_back(std::move(mc));
            }
        }
    }

    if (rd.errors.empty()) {
        cfg.validate();
        return cfg;
    }
    // Report invariant violations of the fields that did parse as well.
    try {
        cfg.validate();
    } catch (const ValidationError& e) {
        rd.errors.insert(rd.errors.end(), e.violations().begin(), e.violations().end());
    } catch (const std::exception&) {
    }
    throw ValidationError(rd.errors);
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError({"config: cannot open " + path.string()});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const ScenarioConfig& cfg) {
    json j;
    j["scenario"] = std::string(to_string(cfg.scenario));
    j["seed"] = cfg.seed;
    j["duration"] = cfg.duration;
    json n;
    n["loss_prob"] = cfg.network.loss_prob;
    if (cfg.network.beacon_loss_prob) n["beacon_loss_prob"] = *cfg.network.beacon_loss_prob;
    n["per_flood_loss"] = cfg.network.per_flood_loss;
    n["slots_per_round"] = cfg.network.slots_per_round;
    n["round_period"] = cfg.network.round_period;
    n["switch_window"] = cfg.network.switch_window;
    n["max_hyperperiod"] = cfg.network.max_hyperperiod;
    j["network"] = n;
    json agents = json::array();
    for (const auto& a : cfg.agents) {
        json aj;
        aj["preset"] = a.preset;
        if (a.A) aj["A"] = matrix_json(*a.A);
        if (a.B) aj["B"] = matrix_json(*a.B);
        aj["x0"] = vector_json(a.x0);
        agents.push_back(aj);
    }
    j["agents"] = agents;
    const auto& c = cfg.controller;
    json cj;
    if (c.F) cj["F"] = matrix_json(*c.F);
    if (c.Q.size()) cj["Q"] = matrix_json(c.Q);
    if (c.R.size()) cj["R"] = matrix_json(c.R);
    if (c.sync_Q.size()) cj["sync_Q"] = matrix_json(c.sync_Q);
    if (c.sync_R.size()) cj["sync_R"] = matrix_json(c.sync_R);
    if (c.Q_sync.size()) cj["Q_sync"] = matrix_json(c.Q_sync);
    cj["topology"] = c.topology;
    if (c.consensus_weights) cj["consensus_weights"] = matrix_json(*c.consensus_weights);
    cj["rule"] = c.rule == AgreementRule::complete ? "complete" : "detector";
    cj["agreement_tol"] = c.agreement_tol;
    cj["agreement_rounds"] = c.agreement_rounds;
    cj["track_gain"] = c.track_gain;
    cj["integrator_gain"] = c.integrator_gain;
    cj["delta"] = c.delta;
    cj["max_horizon"] = c.max_horizon;
    cj["policy"] = std::string(to_string(c.policy));
    j["controller"] = cj;
    if (!cfg.modes.empty()) {
        json modes = json::array();
        for (const auto& m : cfg.modes) modes.push_back({{"id", m.id}, {"at_tick", m.at_tick}, {"team", m.team}});
        j["modes"] = modes;
    }
    if (cfg.process_noise) j["process_noise"] = matrix_json(*cfg.process_noise);
    if (cfg.measurement_noise) j["measurement_noise"] = matrix_json(*cfg.measurement_noise);
    j["artificial_drop"] = cfg.artificial_drop;
    j["drop_agents"] = cfg.drop_agents;
    j["dwell_enforcement"] = cfg.dwell_enforcement;
    return j.dump(2);
}

void ScenarioConfig::validate() const {
    std::vector<std::string> bad;
    auto prob = [&](double p, const std::string& what) {
        if (!(p >= 0.0 && p <= 1.0)) bad.push_back(what + " must lie in [0, 1]");
    };
    if (duration == 0) bad.emplace_back("config.duration must be positive");
    prob(network.loss_prob, "config.network.loss_prob");
    if (network.beacon_loss_prob) prob(*network.beacon_loss_prob, "config.network.beacon_loss_prob");
    if (network.slots_per_round < 1) bad.emplace_back("config.network.slots_per_round must be positive");
    if (network.round_period < 1) bad.emplace_back("config.network.round_period must be positive");
    if (network.switch_window < 1) bad.emplace_back("config.network.switch_window must be positive");
    prob(artificial_drop, "config.artificial_drop");
    if (agents.empty()) bad.emplace_back("config.agents must not be empty");

    Eigen::Index n = -1, m = -1;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const std::string p = "config.agents[" + std::to_string(i) + "]";
        try {
            PlantModel base = plant_preset(agents[i].preset);
            const Mat A = agents[i].A.value_or(base.A());
            const Mat B = agents[i].B.value_or(base.B());
            if (A.rows() != A.cols() || B.rows() != A.rows()) {
                bad.push_back(p + ": A must be square and B must have as many rows as A");
                continue;
            }
            if (agents[i].x0.size() != A.rows()) bad.push_back(p + ".x0 must have " + std::to_string(A.rows()) + " entries");
            if (n < 0) {
                n = A.rows();
                m = B.cols();
            } else if (n != A.rows() || m != B.cols()) {
                bad.push_back(p + ": all agents must share state and input dimensions");
            }
        } catch (const ConfigError& e) {
            bad.push_back(p + ": " + e.what());
        }
    }
    for (std::size_t d : drop_agents)
        if (d >= agents.size()) bad.push_back("config.drop_agents: index " + std::to_string(d) + " out of range");
    auto check_noise = [&](const std::optional<Mat>& s, const char* what) {
        if (!s) return;
        if (n >= 0 && (s->rows() != n || s->cols() != n)) bad.push_back(std::string(what) + " must be n x n");
        else if (!is_psd(*s, 1e-12)) bad.push_back(std::string(what) + " must be symmetric PSD");
    };
    check_noise(process_noise, "config.process_noise");
    check_noise(measurement_noise, "config.measurement_noise");

    const auto& c = controller;
    auto square = [&](const Mat& M, Eigen::Index dim, const char* what) {
        if (M.size() && dim >= 0 && (M.rows() != dim || M.cols() != dim))
            bad.push_back(std::string("config.controller.") + what + " must be " + std::to_string(dim) + " x " +
                          std::to_string(dim));
    };
    square(c.Q, n, "Q");
    square(c.R, m, "R");
    square(c.sync_Q, n, "sync_Q");
    square(c.sync_R, m, "sync_R");
    square(c.Q_sync, n, "Q_sync");
    if (c.F && n >= 0 && (c.F->rows() != m || c.F->cols() != n))
        bad.emplace_back("config.controller.F must be m x n");
    if (c.topology != "all_to_all" && c.topology != "chain")
        bad.emplace_back("config.controller.topology must be 'all_to_all' or 'chain'");
    if (c.consensus_weights) {
        const auto N = static_cast<Eigen::Index>(agents.size());
        const Mat& W = *c.consensus_weights;
        if (W.rows() != N || W.cols() != N) {
            bad.emplace_back("config.controller.consensus_weights must be agents x agents");
        } else {
            if ((W.array() < 0.0).any()) bad.emplace_back("config.controller.consensus_weights must be nonnegative");
            for (Eigen::Index i = 0; i < N; ++i)
                if (std::abs(W.row(i).sum() - 1.0) > 1e-12)
                    bad.push_back("config.controller.consensus_weights row " + std::to_string(i) + " must sum to 1");
        }
    }
    if (!(c.agreement_tol > 0.0)) bad.emplace_back("config.controller.agreement_tol must be positive");
    if (c.agreement_rounds < 1) bad.emplace_back("config.controller.agreement_rounds must be >= 1");
    if (!(c.delta >= 0.0)) bad.emplace_back("config.controller.delta must be >= 0");
    if (c.max_horizon < 1) bad.emplace_back("config.controller.max_horizon must be >= 1");

    std::set<std::uint32_t> ids;
    std::uint64_t last_tick = 0;
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const auto& md = modes[i];
        const std::string p = "config.modes[" + std::to_string(i) + "]";
        if (!ids.insert(md.id).second) bad.push_back(p + ": duplicate mode id");
        if (i == 0 && md.at_tick != 0) bad.push_back(p + ": the first mode must start at tick 0");
        if (i > 0 && md.at_tick <= last_tick) bad.push_back(p + ": switch times must increase");
        if (md.at_tick % network.round_period != 0 && network.round_period > 0)
            bad.push_back(p + ": at_tick must be a multiple of round_period");
        for (std::size_t a : md.team)
            if (a >= agents.size()) bad.push_back(p + ": team index " + std::to_string(a) + " out of range");
        last_tick = md.at_tick;
    }
    if (scenario == ScenarioKind::sync_modes && modes.empty())
        bad.emplace_back("config.modes: sync_modes needs at least one mode");
    if (scenario != ScenarioKind::sync_modes && !modes.empty())
        bad.emplace_back("config.modes: only sync_modes supports mode changes");
    if ((scenario == ScenarioKind::consensus) && n >= 0 && m != 1)
        bad.emplace_back("config.agents: consensus tracking needs single-input agents");
    if (!bad.empty()) throw ValidationError(std::move(bad));
}

std::vector<PlantModel> agent_models(const ScenarioConfig& cfg) {
    std::vector<PlantModel> out;
    for (const auto& a : cfg.agents) {
        PlantModel base = plant_preset(a.preset);
        const Mat A = a.A.value_or(base.A());
        const Mat B = a.B.value_or(base.B());
        const Mat Sv = cfg.process_noise.value_or(A.rows() == base.n() ? base.sigma_v() : default_process_noise(A.rows()));
        const Mat Sw =
            cfg.measurement_noise.value_or(A.rows() == base.n() ? base.sigma_w() : default_measurement_noise(A.rows()));
        out.emplace_back(A, B, Sv, Sw);
    }
    return out;
}

} // namespace wncs
