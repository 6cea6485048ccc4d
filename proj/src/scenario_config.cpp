#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "smf/experiment_runner.hpp"

namespace smf {

using nlohmann::json;

namespace {

const char* multimode_preset = R"({
  "label": "multimode",
  "grid": { "points": 513 },
  "pump": { "shape": "cw_carved_rect", "duration_ps": 100, "wavelength_nm": 1310 },
  "source": {
    "gamma_per_w_km": 1.9,
    "length_m": 1000,
    "temperature_k": 77,
    "detuning_thz": 1.2,
    "pair_probability": 0.125,
    "raman_gain_file": "",
    "raman_gain_scale": 1.0
  },
  "filters": {
    "signal": { "shape": "gaussian", "bandwidth_ghz": 24.6 },
    "idler": { "shape": "gaussian", "bandwidth_ghz": 24.6 }
  },
  "gate": { "shape": "rectangular", "duration_ps": 1000 },
  "detectors": {
    "efficiency_model": "transmission",
    "quantum_efficiency": 0.2,
    "signal_transmission": 0.034,
    "idler_transmission": 0.05,
    "dark_mean": 1.6e-4,
    "retention_cutoff": 1e-3,
    "max_modes_per_arm": 128
  },
  "scan": { "pulses": 2e10, "points": 41, "half_range_dip_widths": 3 }
})";

const char* single_mode_preset = R"({
  "label": "single_mode",
  "grid": { "points": 513 },
  "pump": { "shape": "gaussian", "fwhm_ghz": 68.3, "wavelength_nm": 1310 },
  "source": {
    "gamma_per_w_km": 1.9,
    "length_m": 1000,
    "temperature_k": 77,
    "detuning_thz": 1.2,
    "pair_probability": 0.039,
    "raman_gain_file": "",
    "raman_gain_scale": 1.0
  },
  "filters": {
    "signal": { "shape": "rectangular", "bandwidth_nm": 0.4 },
    "idler": { "shape": "rectangular", "bandwidth_nm": 0.4 }
  },
  "gate": { "shape": "rectangular", "duration_ps": 1000 },
  "detectors": {
    "efficiency_model": "transmission",
    "quantum_efficiency": 0.2,
    "signal_transmission": 0.055,
    "idler_transmission": 0.07,
    "dark_mean": 1.6e-4,
    "retention_cutoff": 1e-3,
    "max_modes_per_arm": 128
  },
  "scan": { "pulses": 1e10, "points": 41, "half_range_dip_widths": 3 }
})";

// Walks one JSON object, recording missing required keys and rejecting unknown ones.
class Section {
public:
    Section(const json& obj, std::string path, std::vector<std::string>& missing)
        : obj_(obj), path_(std::move(path)), missing_(missing) {
        if (!obj_.is_object())
            throw ConfigError("config section '" + path_ + "' must be an object");
    }

    bool has(const std::string& key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }

    const json* find(const std::string& key) {
        seen_.insert(key);
        return has(key) ? &obj_.at(key) : nullptr;
    }

    double number(const std::string& key) {
        const json* v = find(key);
        if (!v) {
            missing_.push_back(full(key));
            return 0.0;
        }
        return as_number(*v, key);
    }

    double number_or(const std::string& key, double fallback) {
        const json* v = find(key);
        return v ? as_number(*v, key) : fallback;
    }

    std::string string(const std::string& key) {
        const json* v = find(key);
        if (!v) {
            missing_.push_back(full(key));
            return {};
        }
        if (!v->is_string())
            throw ConfigError("config key '" + full(key) + "' must be a string");
        return v->get<std::string>();
    }

    std::string string_or(const std::string& key, const std::string& fallback) {
        const json* v = find(key);
        if (!v)
            return fallback;
        if (!v->is_string())
            throw ConfigError("config key '" + full(key) + "' must be a string");
        return v->get<std::string>();
    }

    /// Exactly one of the unit-suffixed alternatives must be present.
    std::pair<std::string, double> one_of(std::initializer_list<std::string> keys, bool required = true) {
        std::vector<std::string> present;
        for (const auto& k : keys) {
            seen_.insert(k);
            if (has(k))
                present.push_back(k);
        }
        if (present.size() > 1)
            throw ConfigError("inconsistent units: '" + full(present[0]) + "' and '" + full(present[1]) +
                              "' both given");
        if (present.empty()) {
            if (required) {
                std::string names;
                for (const auto& k : keys)
                    names += (names.empty() ? "" : "|") + k;
                missing_.push_back(full(names));
            }
            return {"", 0.0};
        }
        return {present[0], as_number(obj_.at(present[0]), present[0])};
    }

    Section child(const std::string& key) {
        const json* v = find(key);
        if (!v) {
            missing_.push_back(full(key));
            static const json empty = json::object();
            return Section(empty, full(key), missing_, true);
        }
        return Section(*v, full(key), missing_);
    }

    void finish() const {
        if (absent_)
            return;
        for (const auto& [k, v] : obj_.items())
            if (!seen_.count(k))
                throw ConfigError("unknown config key '" + full(k) + "'");
    }

    std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    Section(const json& obj, std::string path, std::vector<std::string>& missing, bool absent)
        : obj_(obj), path_(std::move(path)), missing_(missing), absent_(absent) {}

    double as_number(const json& v, const std::string& key) const {
        if (!v.is_number())
            throw ConfigError("config key '" + full(key) + "' must be a number");
        const double x = v.get<double>();
        if (!std::isfinite(x))
            throw ConfigError("config key '" + full(key) + "' must be finite");
        return x;
    }

    const json& obj_;
    std::string path_;
    std::vector<std::string>& missing_;
    std::set<std::string> seen_;
    bool absent_ = false;
};

double bandwidth_from(const std::pair<std::string, double>& value, double center, const std::string& what) {
    if (value.first.empty())
        return 0.0;
    if (value.first.ends_with("_ghz"))
        return ghz_to_angular(value.second);
    if (value.first.ends_with("_thz"))
        return thz_to_angular(value.second);
    if (value.first.ends_with("_nm")) {
        // d omega = omega^2 d lambda / (2 pi c) at the band center.
        return center * center * value.second * 1e-9 / (constants::two_pi * constants::c_light);
    }
    throw ConfigError("unsupported unit for " + what);
}

double time_from(const std::pair<std::string, double>& value) {
    if (value.first.ends_with("_ps"))
        return value.second * 1e-12;
    if (value.first.ends_with("_ns"))
        return value.second * 1e-9;
    if (value.first.ends_with("_s"))
        return value.second;
    return 0.0;
}

ProfileKind parse_kind(const std::string& s, const std::string& where) {
    if (s == "rectangular")
        return ProfileKind::rectangular;
    if (s == "gaussian")
        return ProfileKind::gaussian;
    if (s == "tabulated")
        return ProfileKind::tabulated;
    throw ConfigError("unknown shape '" + s + "' at " + where);
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base_dir) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base_dir.empty())
        return base_dir / path;
    return path;
}

FilterSpec parse_filter(Section sec, double center, const std::filesystem::path& base_dir) {
    FilterSpec spec;
    const std::string shape = sec.string("shape");
    if (shape.empty())
        return spec;
    spec.kind = parse_kind(shape, sec.full("shape"));
    if (spec.kind == ProfileKind::tabulated) {
        const json* files = sec.find("spectrum_files");
        if (!files || !files->is_array() || files->empty())
            throw ConfigError(sec.full("spectrum_files") + " must list at least one spectrum file");
        for (const auto& f : *files) {
            if (!f.is_string())
                throw ConfigError(sec.full("spectrum_files") + " entries must be strings");
            spec.stages.push_back(load_transmission_table(resolve(f.get<std::string>(), base_dir)));
        }
        if (const json* a = sec.find("absolute"); a) {
            if (!a->is_boolean())
                throw ConfigError(sec.full("absolute") + " must be true or false");
            spec.absolute = a->get<bool>();
        }
        // Nominal width still sets the grid.
        spec.width = bandwidth_from(sec.one_of({"bandwidth_ghz", "bandwidth_nm"}), center, sec.full("bandwidth"));
    } else {
        spec.width = bandwidth_from(sec.one_of({"bandwidth_ghz", "bandwidth_nm"}), center, sec.full("bandwidth"));
    }
    sec.finish();
    return spec;
}

} // namespace

std::vector<std::string> preset_names() { return {"multimode", "single_mode"}; }

json preset_config(const std::string& name) {
    if (name == "multimode")
        return json::parse(multimode_preset);
    if (name == "single_mode")
        return json::parse(single_mode_preset);
    throw ConfigError("unknown preset '" + name + "' (known: multimode, single_mode)");
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override '" + assignment + "' must look like key.path=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &config;
    std::istringstream parts(key);
    std::string part;
    std::vector<std::string> path;
    while (std::getline(parts, part, '.'))
        path.push_back(part);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        if (!node->is_object())
            throw ConfigError("override path '" + key + "' crosses a non-object value");
        node = &(*node)[path[i]];
        if (node->is_null())
            *node = json::object();
    }
    if (!node->is_object())
        throw ConfigError("override path '" + key + "' crosses a non-object value");
    if (value.is_null())
        node->erase(path.back());
    else
        (*node)[path.back()] = value;
}

double Scenario::efficiency(Detector d) const {
    const double t = transmission[static_cast<std::size_t>(d)];
    return efficiency_model == EfficiencyModel::transmission ? t : t * quantum_efficiency;
}

void Scenario::validate() const {
    if (grid_points < 16)
        throw ConfigError("grid.points must be at least 16");
    if (!(pump_center > 0.0))
        throw ConfigError("pump wavelength must be positive");
    if (!(detuning > 0.0))
        throw ConfigError("source.detuning_thz must be positive");
    if (!(gamma > 0.0))
        throw ConfigError("source.gamma_per_w_km must be positive");
    if (!(length > 0.0))
        throw ConfigError("source.length_m must be positive");
    if (!(temperature > 0.0))
        throw ConfigError("source.temperature_k must be positive");
    if (!(pair_probability > 0.0) || pair_probability >= max_pair_probability)
        throw ConfigError("source.pair_probability must lie in (0, 0.2)");
    if (raman_gain_scale < 0.0)
        throw ConfigError("source.raman_gain_scale must be non-negative");
    if (!(signal_filter.width > 0.0) || !(idler_filter.width > 0.0))
        throw ConfigError("filter bandwidths must be positive");
    if (!(gate.duration > 0.0))
        throw ConfigError("gate duration must be positive");
    for (std::size_t d = 0; d < 4; ++d) {
        const double eta = efficiency(static_cast<Detector>(d));
        if (!(eta >= 0.0 && eta <= 1.0))
            throw ConfigError("detector efficiencies must lie in [0, 1]");
        if (!(dark_mean[d] >= 0.0))
            throw ConfigError("detectors.dark_mean must be non-negative");
    }
    if (!(quantum_efficiency >= 0.0 && quantum_efficiency <= 1.0))
        throw ConfigError("detectors.quantum_efficiency must lie in [0, 1]");
    if (max_modes_per_arm == 0)
        throw ConfigError("detectors.max_modes_per_arm must be positive");
    if (!(pulses > 0.0))
        throw ConfigError("scan.pulses must be positive");
    if (!std::is_sorted(taus.begin(), taus.end()))
        throw ConfigError("scan.tau_ps must be sorted");
    if (taus.empty() && auto_tau_points < 1)
        throw ConfigError("scan.points must be positive");
}

Scenario scenario_from_json(const json& input, const std::filesystem::path& base_dir) {
    if (!input.is_object())
        throw ConfigError("config must be a JSON object");
    json config = input;
    if (config.contains("preset")) {
        if (!config["preset"].is_string())
            throw ConfigError("'preset' must be a string");
        json base = preset_config(config["preset"].get<std::string>());
        config.erase("preset");
        base.merge_patch(config);
        config = std::move(base);
    }

    std::vector<std::string> missing;
    Scenario s;
    Section root(config, "", missing);
    s.label = root.string_or("label", "custom");

    {
        Section grid = root.child("grid");
        s.grid_points = static_cast<std::size_t>(grid.number_or("points", 513));
        grid.finish();
    }
    {
        Section pump = root.child("pump");
        const std::string shape = pump.string("shape");
        s.pump_center = wavelength_nm_to_angular(std::max(pump.number("wavelength_nm"), 1e-300));
        if (shape == "cw_carved_rect") {
            s.pump.shape = PumpShape::cw_carved_rect;
            s.pump.duration = time_from(pump.one_of({"duration_ps", "duration_ns"}));
        } else if (shape == "gaussian") {
            s.pump.shape = PumpShape::gaussian;
            s.pump.fwhm = bandwidth_from(pump.one_of({"fwhm_ghz", "fwhm_nm"}), s.pump_center, "pump.fwhm");
        } else if (!shape.empty()) {
            throw ConfigError("unknown pump shape '" + shape + "' (cw_carved_rect or gaussian)");
        }
        pump.finish();
    }
    {
        Section src = root.child("source");
        s.gamma = src.number("gamma_per_w_km") * 1e-3;
        s.length = src.number("length_m");
        s.temperature = src.number("temperature_k");
        s.detuning = thz_to_angular(src.number("detuning_thz"));
        s.pair_probability = src.number("pair_probability");
        const std::string raman = src.string_or("raman_gain_file", "");
        s.raman_gain_file = raman.empty() ? default_raman_gain_file() : resolve(raman, base_dir);
        s.raman_gain_scale = src.number_or("raman_gain_scale", 1.0);
        src.finish();
    }
    {
        Section filters = root.child("filters");
        s.signal_filter = parse_filter(filters.child("signal"), s.pump_center - s.detuning, base_dir);
        s.idler_filter = parse_filter(filters.child("idler"), s.pump_center + s.detuning, base_dir);
        filters.finish();
    }
    {
        Section gate = root.child("gate");
        const std::string shape = gate.string("shape");
        if (shape == "rectangular")
            s.gate = GateProfile::rectangular(time_from(gate.one_of({"duration_ps", "duration_ns"})));
        else if (shape == "gaussian")
            s.gate = GateProfile::gaussian(time_from(gate.one_of({"fwhm_ps", "fwhm_ns"})));
        else if (!shape.empty())
            throw ConfigError("unknown gate shape '" + shape + "' (rectangular or gaussian)");
        gate.finish();
    }
    {
        Section det = root.child("detectors");
        const std::string model = det.string_or("efficiency_model", "transmission");
        if (model == "transmission")
            s.efficiency_model = EfficiencyModel::transmission;
        else if (model == "transmission_times_qe")
            s.efficiency_model = EfficiencyModel::transmission_times_qe;
        else
            throw ConfigError("detectors.efficiency_model must be 'transmission' or 'transmission_times_qe'");
        s.quantum_efficiency = det.number_or("quantum_efficiency", 1.0);
        const double ts = det.number("signal_transmission");
        const double ti = det.number("idler_transmission");
        s.transmission = {det.number_or("transmission_a", ts), det.number_or("transmission_b", ts),
                          det.number_or("transmission_c", ti), det.number_or("transmission_d", ti)};
        const double mu = det.number("dark_mean");
        s.dark_mean = {mu, mu, mu, mu};
        s.mode_cutoff = det.number_or("retention_cutoff", retention_cutoff);
        s.max_modes_per_arm = static_cast<std::size_t>(det.number_or("max_modes_per_arm", 12));
        det.finish();
    }
    {
        Section scan = root.child("scan");
        s.pulses = scan.number("pulses");
        if (const json* t = scan.find("tau_ps"); t) {
            if (!t->is_array() || t->empty())
                throw ConfigError("scan.tau_ps must be a non-empty list");
            for (const auto& v : *t) {
                if (!v.is_number())
                    throw ConfigError("scan.tau_ps entries must be numbers");
                s.taus.push_back(v.get<double>() * 1e-12);
            }
        }
        s.auto_tau_points = static_cast<std::size_t>(scan.number_or("points", 41));
        s.auto_tau_half_range = scan.number_or("half_range_dip_widths", 3.0);
        scan.finish();
    }
    root.find("label");
    root.finish();

    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing)
            list += (list.empty() ? "" : ", ") + m;
        throw ConfigError("missing config fields: " + list);
    }
    s.validate();
    return s;
}

Scenario load_scenario(const std::string& config_text, const std::filesystem::path& base_dir) {
    json config = json::object();
    try {
        if (config_text.find_first_not_of(" \t\r\n") != std::string::npos)
            config = json::parse(config_text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (config.is_null())
        config = json::object();
    return scenario_from_json(config, base_dir);
}

Scenario load_preset(const std::string& name) { return scenario_from_json(preset_config(name)); }

} // namespace smf
