#pragma once

// MDP JSON serialization ("mdp-v1" schema). Writing is done by hand so reals
// always carry 17 significant digits; reading goes through nlohmann::json.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "statesim/io_util.hpp"
#include "statesim/mdp.hpp"

namespace statesim {

inline std::string mdp_to_json(const Mdp& mdp) {
    validate_mdp(mdp);
    std::string out;
    out.reserve(mdp.transitions.size() * 8 + 256);
    out += "{\n";
    out += "  \"schema\": \"mdp-v1\",\n";
    out += "  \"n_states\": " + std::to_string(mdp.n_states) + ",\n";
    out += "  \"n_actions\": " + std::to_string(mdp.n_actions) + ",\n";

    out += "  \"rewards\": [\n";
    for (int s = 0; s < mdp.n_states; ++s) {
        out += "    [";
        for (int a = 0; a < mdp.n_actions; ++a) {
            if (a) out += ", ";
            out += format_real(mdp.reward(s, a));
        }
        out += s + 1 < mdp.n_states ? "],\n" : "]\n";
    }
    out += "  ],\n";

    out += "  \"transitions\": [\n";
    for (int s = 0; s < mdp.n_states; ++s) {
        out += "    [\n";
        for (int a = 0; a < mdp.n_actions; ++a) {
            out += "      [";
            for (int t = 0; t < mdp.n_states; ++t) {
                if (t) out += ", ";
                out += format_real(mdp.transition(s, a, t));
            }
            out += a + 1 < mdp.n_actions ? "],\n" : "]\n";
        }
        out += s + 1 < mdp.n_states ? "    ],\n" : "    ]\n";
    }
    out += mdp.labels.empty() ? "  ]\n" : "  ],\n";

    if (!mdp.labels.empty()) {
        out += "  \"labels\": [";
        for (int s = 0; s < mdp.n_states; ++s) {
            if (s) out += ", ";
            out += nlohmann::json(mdp.labels[s]).dump();
        }
        out += "]\n";
    }
    out += "}\n";
    return out;
}

inline void save_mdp(const Mdp& mdp, const std::filesystem::path& path) {
    write_text_file(path, mdp_to_json(mdp));
}

inline Mdp mdp_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("mdp file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw IoError("mdp file: top level must be a JSON object");
    if (!j.contains("schema") || !j["schema"].is_string() || j["schema"] != "mdp-v1")
        throw IoError("mdp file: missing or unsupported \"schema\" (expected \"mdp-v1\")");
    for (const char* key : {"n_states", "n_actions", "rewards", "transitions"}) {
        if (!j.contains(key)) throw IoError(std::string("mdp file: missing field \"") + key + "\"");
    }
    if (!j["n_states"].is_number_integer() || !j["n_actions"].is_number_integer())
        throw IoError("mdp file: n_states and n_actions must be integers");

    const int ns = j["n_states"].get<int>();
    const int na = j["n_actions"].get<int>();
    if (ns <= 0 || na <= 0) throw IoError("mdp file: n_states and n_actions must be positive");

    Mdp mdp(ns, na);

    const auto& rw = j["rewards"];
    if (!rw.is_array() || rw.size() != static_cast<std::size_t>(ns))
        throw IoError("mdp file: rewards must be an array of n_states rows");
    for (int s = 0; s < ns; ++s) {
        const auto& row = rw[s];
        if (!row.is_array() || row.size() != static_cast<std::size_t>(na))
            throw IoError("mdp file: rewards row " + std::to_string(s) + " must have n_actions entries");
        for (int a = 0; a < na; ++a) {
            if (!row[a].is_number()) throw IoError("mdp file: non-numeric reward");
            mdp.reward(s, a) = row[a].get<double>();
        }
    }

    const auto& tr = j["transitions"];
    if (!tr.is_array() || tr.size() != static_cast<std::size_t>(ns))
        throw IoError("mdp file: transitions must be an array of n_states entries");
    for (int s = 0; s < ns; ++s) {
        const auto& per_action = tr[s];
        if (!per_action.is_array() || per_action.size() != static_cast<std::size_t>(na))
            throw IoError("mdp file: transitions[" + std::to_string(s) + "] must have n_actions rows");
        for (int a = 0; a < na; ++a) {
            const auto& row = per_action[a];
            if (!row.is_array() || row.size() != static_cast<std::size_t>(ns))
                throw IoError("mdp file: transition row (s=" + std::to_string(s) + ", a=" +
                              std::to_string(a) + ") must have n_states entries");
            for (int t = 0; t < ns; ++t) {
                if (!row[t].is_number()) throw IoError("mdp file: non-numeric transition probability");
                mdp.transition(s, a, t) = row[t].get<double>();
            }
        }
    }

    if (j.contains("labels")) {
        const auto& lb = j["labels"];
        if (!lb.is_array() || lb.size() != static_cast<std::size_t>(ns))
            throw IoError("mdp file: labels must be an array of n_states strings");
        mdp.labels.reserve(ns);
        for (int s = 0; s < ns; ++s) {
            if (!lb[s].is_string()) throw IoError("mdp file: non-string label");
            mdp.labels.push_back(lb[s].get<std::string>());
        }
    }

    validate_mdp(mdp);  // invariant violations surface as std::invalid_argument
    return mdp;
}

inline Mdp load_mdp(const std::filesystem::path& path) {
    return mdp_from_json(read_text_file(path));
}

}  // namespace statesim
