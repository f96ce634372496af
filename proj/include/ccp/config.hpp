#pragma once
// Run configuration files: `dotted.key = value` lines, `#` comments. A
// `preset` key selects a base network; later keys override it.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ccp/network.hpp"
#include "ccp/train.hpp"

namespace ccp {

struct RunConfig {
    NetworkConfig network = desk_config();
    SgdConfig sgd;
    int steps = 200;
    int sample_ratio = 2;
    bool occluded_only = false;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<int> parse_int_list(const std::string& v, const std::string& path, int line) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stoi(trim(item)));
        } catch (const std::exception&) {
            throw ParseError(path, static_cast<size_t>(line), "bad integer list element '" + item + "'");
        }
    }
    if (out.empty()) throw ParseError(path, static_cast<size_t>(line), "empty list");
    return out;
}

}  // namespace detail

inline RunConfig parse_run_config(std::istream& is, const std::string& path) {
    RunConfig cfg;
    std::string raw;
    int lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string line = detail::trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path, static_cast<size_t>(lineno), "expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ParseError(path, static_cast<size_t>(lineno), "empty key or value");

        auto bad_value = [&]() {
            return ParseError(path, static_cast<size_t>(lineno),
                              "bad value '" + val + "' for key '" + key + "'");
        };
        auto as_int = [&]() {
            try {
                return std::stoi(val);
            } catch (const std::exception&) {
                throw bad_value();
            }
        };
        auto as_double = [&]() {
            try {
                return std::stod(val);
            } catch (const std::exception&) {
                throw bad_value();
            }
        };
        auto as_bool = [&]() {
            if (val == "true" || val == "yes" || val == "1") return true;
            if (val == "false" || val == "no" || val == "0") return false;
            throw bad_value();
        };

        if (key == "preset") {
            if (val == "desk")
                cfg.network = desk_config();
            else if (val == "tiny")
                cfg.network = tiny_config();
            else if (val == "full")
                cfg.network = full_config();
            else
                throw bad_value();
        } else if (key == "pyramid.rates") {
            cfg.network.pyramid.dilation_rates = detail::parse_int_list(val, path, lineno);
        } else if (key == "pyramid.mode") {
            if (val == "cascaded")
                cfg.network.pyramid.mode = PyramidMode::cascaded;
            else if (val == "parallel")
                cfg.network.pyramid.mode = PyramidMode::parallel;
            else
                throw bad_value();
        } else if (key == "pyramid.branch_channels") {
            cfg.network.pyramid.branch_channels = as_int();
        } else if (key == "pyramid.branch_subvolumes") {
            cfg.network.pyramid.branch_subvolumes = as_int();
        } else if (key == "pyramid.cascade_subvolumes") {
            cfg.network.pyramid.cascade_subvolumes = as_int();
        } else if (key == "pyramid.reverse_order") {
            cfg.network.pyramid.reverse_order = as_bool();
        } else if (key == "output.resolution") {
            if (val == "full")
                cfg.network.output_resolution = OutputResolution::full;
            else if (val == "half")
                cfg.network.output_resolution = OutputResolution::half;
            else if (val == "quarter")
                cfg.network.output_resolution = OutputResolution::quarter;
            else
                throw bad_value();
        } else if (key == "grb.mode") {
            GrbMode m;
            if (val == "full")
                m = GrbMode::full;
            else if (val == "no_amplify")
                m = GrbMode::no_amplify;
            else if (val == "no_guidance")
                m = GrbMode::no_guidance;
            else
                throw bad_value();
            for (auto& st : cfg.network.grr) st.grb_mode = m;
        } else if (key == "train.learning_rate") {
            cfg.sgd.learning_rate = as_double();
        } else if (key == "train.momentum") {
            cfg.sgd.momentum = as_double();
        } else if (key == "train.weight_decay") {
            cfg.sgd.weight_decay = as_double();
        } else if (key == "train.lr_drop_step") {
            cfg.sgd.lr_drop_step = as_int();
        } else if (key == "train.lr_drop_factor") {
            cfg.sgd.lr_drop_factor = as_double();
        } else if (key == "train.batch_size") {
            cfg.sgd.batch_size = as_int();
        } else if (key == "train.steps") {
            cfg.steps = as_int();
        } else if (key == "sample.ratio") {
            cfg.sample_ratio = as_int();
        } else if (key == "sample.occluded_only") {
            cfg.occluded_only = as_bool();
        } else {
            throw ParseError(path, static_cast<size_t>(lineno), "unknown key '" + key + "'");
        }
    }
    cfg.network.validate();
    cfg.sgd.validate();
    if (cfg.steps < 0 || cfg.sample_ratio < 1) throw ConfigError("config: bad training limits");
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    return parse_run_config(is, path);
}

}  // namespace ccp
