#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mqbqr/closed_loop.hpp"
#include "mqbqr/converter_model.hpp"
#include "mqbqr/formulas.hpp"
#include "mqbqr/losses.hpp"
#include "mqbqr/pv.hpp"
#include "mqbqr/simulator.hpp"
#include "mqbqr/small_signal.hpp"

#ifndef MQBQR_PRESET_DIR
#define MQBQR_PRESET_DIR "presets"
#endif

namespace mqbqr::config {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kOutputDirEnv = "MQBQR_OUTPUT_DIR";
inline const std::vector<std::string> kScenarios = {"simulate", "design", "stress",   "bode",
                                                    "losses",   "compare", "train", "closedloop"};

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kNumericalFailure = 2 };

// ---------------------------------------------------------------------------
// Field readers that record problems instead of throwing

class Reader {
public:
    std::vector<FieldIssue> issues;

    void fail(const std::string& path, const std::string& msg) { issues.push_back({path, msg}); }

    const json* object(const json& parent, const std::string& key, const std::string& path, bool required = false) {
        if (!parent.contains(key)) {
            if (required) fail(path, "missing object");
            return nullptr;
        }
        const json& v = parent.at(key);
        if (!v.is_object()) {
            fail(path, "must be an object");
            return nullptr;
        }
        return &v;
    }

    double number(const json& obj, const std::string& key, const std::string& path, double fallback) {
        if (!obj.contains(key)) return fallback;
        const json& v = obj.at(key);
        if (!v.is_number()) {
            fail(path, "must be a number");
            return fallback;
        }
        return v.get<double>();
    }

    long integer(const json& obj, const std::string& key, const std::string& path, long fallback) {
        if (!obj.contains(key)) return fallback;
        const json& v = obj.at(key);
        if (!v.is_number_integer()) {
            fail(path, "must be an integer");
            return fallback;
        }
        return v.get<long>();
    }

    std::string string(const json& obj, const std::string& key, const std::string& path, std::string fallback) {
        if (!obj.contains(key)) return fallback;
        const json& v = obj.at(key);
        if (!v.is_string()) {
            fail(path, "must be a string");
            return fallback;
        }
        return v.get<std::string>();
    }

    std::vector<double> numbers(const json& obj, const std::string& key, const std::string& path) {
        std::vector<double> out;
        if (!obj.contains(key)) return out;
        const json& v = obj.at(key);
        if (!v.is_array()) {
            fail(path, "must be an array of numbers");
            return out;
        }
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(path + "[" + std::to_string(i) + "]", "must be a number");
            else out.push_back(v[i].get<double>());
        }
        return out;
    }

    void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!ok.count(it.key())) fail(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
    }

    void positive(double v, const std::string& path) {
        if (!(v > 0.0) || !std::isfinite(v)) fail(path, "must be finite and > 0");
    }
    void non_negative(double v, const std::string& path) {
        if (!(v >= 0.0) || !std::isfinite(v)) fail(path, "must be finite and >= 0");
    }
    void open_unit(double v, const std::string& path) {
        if (!(v > 0.0 && v < 1.0)) fail(path, "must lie in (0, 1)");
    }
};

inline void read_params(Reader& r, const json& obj, const std::string& path, ConverterParams& p) {
    r.only_keys(obj, path, {"L1", "L2", "L3", "L4", "C1", "C2", "Co", "R", "Vpv", "Vbat", "fs", "D", "parasitics"});
    p.L1 = r.number(obj, "L1", path + ".L1", p.L1);
    p.L2 = r.number(obj, "L2", path + ".L2", p.L2);
    p.L3 = r.number(obj, "L3", path + ".L3", p.L3);
    p.L4 = r.number(obj, "L4", path + ".L4", p.L4);
    p.C1 = r.number(obj, "C1", path + ".C1", p.C1);
    p.C2 = r.number(obj, "C2", path + ".C2", p.C2);
    p.Co = r.number(obj, "Co", path + ".Co", p.Co);
    p.R = r.number(obj, "R", path + ".R", p.R);
    p.Vpv = r.number(obj, "Vpv", path + ".Vpv", p.Vpv);
    p.Vbat = r.number(obj, "Vbat", path + ".Vbat", p.Vbat);
    p.fs = r.number(obj, "fs", path + ".fs", p.fs);
    p.D = r.number(obj, "D", path + ".D", p.D);
    if (const json* par = r.object(obj, "parasitics", path + ".parasitics")) {
        const std::string pp = path + ".parasitics";
        r.only_keys(*par, pp, {"Rds_on", "Vf_diode", "RL_copper", "esr_cap"});
        p.parasitics.Rds_on = r.number(*par, "Rds_on", pp + ".Rds_on", p.parasitics.Rds_on);
        p.parasitics.Vf_diode = r.number(*par, "Vf_diode", pp + ".Vf_diode", p.parasitics.Vf_diode);
        p.parasitics.RL_copper = r.number(*par, "RL_copper", pp + ".RL_copper", p.parasitics.RL_copper);
        p.parasitics.esr_cap = r.number(*par, "esr_cap", pp + ".esr_cap", p.parasitics.esr_cap);
    }
}

inline PidController read_pid(Reader& r, const json& parent, const std::string& path) {
    PidController c;
    c.Kp = 0.002;
    c.Ki = 0.05;
    c.Kd = 0.0;
    c.bias = 0.3;
    c.D_min = 0.05;
    c.D_max = 0.9;
    if (const json* o = r.object(parent, "pid", path)) {
        r.only_keys(*o, path, {"Kp", "Ki", "Kd", "bias", "D_min", "D_max"});
        c.Kp = r.number(*o, "Kp", path + ".Kp", c.Kp);
        c.Ki = r.number(*o, "Ki", path + ".Ki", c.Ki);
        c.Kd = r.number(*o, "Kd", path + ".Kd", c.Kd);
        c.bias = r.number(*o, "bias", path + ".bias", c.bias);
        c.D_min = r.number(*o, "D_min", path + ".D_min", c.D_min);
        c.D_max = r.number(*o, "D_max", path + ".D_max", c.D_max);
    }
    if (!(c.D_min > 0.0 && c.D_min < c.D_max && c.D_max < 1.0))
        r.fail(path + ".D_min", "clamp must satisfy 0 < D_min < D_max < 1");
    return c;
}

inline std::vector<ProfileStep> read_profile(Reader& r, const json& parent, const std::string& path) {
    std::vector<ProfileStep> out;
    if (!parent.contains("profile")) return out;
    const json& arr = parent.at("profile");
    if (!arr.is_array()) {
        r.fail(path, "must be an array");
        return out;
    }
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string ip = path + "[" + std::to_string(i) + "]";
        if (!arr[i].is_object()) {
            r.fail(ip, "must be an object");
            continue;
        }
        r.only_keys(arr[i], ip, {"t", "R", "Vpv"});
        ProfileStep s;
        s.t = r.number(arr[i], "t", ip + ".t", 0.0);
        r.non_negative(s.t, ip + ".t");
        if (arr[i].contains("R")) {
            s.R = r.number(arr[i], "R", ip + ".R", 1.0);
            r.positive(*s.R, ip + ".R");
        }
        if (arr[i].contains("Vpv")) s.Vpv = r.number(arr[i], "Vpv", ip + ".Vpv", 0.0);
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scenario settings

struct SimulateSettings {
    SimConfig sim;
    double i_src = 0.0;
    std::vector<double> sweep;
};

struct DesignSettings {
    SizingSpec sizing;
    std::optional<PvPanel> panel;
};

struct StressSettings {
    double D = 0.5, Io = 1.0, Vpv = 20.0, Vbat = 12.0, Vo = 52.0;
};

struct BodeSettings {
    TfInput input = TfInput::Duty;
    double f_min = 1.0, f_max = 1e5;
    long points = 200;
    bool identified = true;
};

struct LossesSettings {
    LossInputs inputs;
    CopperMode mode = CopperMode::PaperLinear;
    double P_out = 200.0;
    std::optional<double> P_total_reference;
    std::optional<SwitchingTimes> from_waveforms;
};

struct CompareSettings {
    double D = 0.5;
    ComparisonOptions options;
};

struct TrainSettings {
    PidController pid;
    std::vector<TrainingScenario> scenarios;
    long samples_per_scenario = 1000;
    long epochs = 200;
    double learning_rate = 0.5;
    long K = 5;
    double e_scale = 20.0;
    double de_scale = 2000.0;
};

struct ClosedLoopSettings {
    std::string controller = "pid";
    double Vref = 52.0;
    double horizon = 1.0;
    std::vector<ProfileStep> profile;
    PidController pid;
    TrainSettings train;  // used when controller = anfis
};

struct RunConfig {
    std::string scenario;
    ConverterParams params;
    ModelVariant variant = ModelVariant::Reconciled;
    std::string output_dir = "out";
    std::uint64_t seed = 1;
    int precision = csv::kDefaultPrecision;
    json block;
};

inline std::vector<TrainingScenario> default_training_scenarios() {
    return {
        {52.0, 1.0, {}, std::nullopt},
        {52.0, 1.0, {}, 0.4},
        {52.0, 1.0, {}, 0.25},
        {52.0, 1.0, {{0.5, 500.0, std::nullopt}}, std::nullopt},
    };
}

inline TrainSettings read_train(Reader& r, const json& b, const std::string& path) {
    TrainSettings s;
    r.only_keys(b, path,
                {"pid", "scenarios", "samples_per_scenario", "epochs", "learning_rate", "K", "e_scale", "de_scale"});
    s.pid = read_pid(r, b, path + ".pid");
    s.samples_per_scenario = r.integer(b, "samples_per_scenario", path + ".samples_per_scenario", s.samples_per_scenario);
    s.epochs = r.integer(b, "epochs", path + ".epochs", s.epochs);
    s.learning_rate = r.number(b, "learning_rate", path + ".learning_rate", s.learning_rate);
    s.K = r.integer(b, "K", path + ".K", s.K);
    s.e_scale = r.number(b, "e_scale", path + ".e_scale", s.e_scale);
    s.de_scale = r.number(b, "de_scale", path + ".de_scale", s.de_scale);
    if (s.samples_per_scenario < 1) r.fail(path + ".samples_per_scenario", "must be >= 1");
    if (s.epochs < 0) r.fail(path + ".epochs", "must be >= 0");
    if (s.K < 1) r.fail(path + ".K", "must be >= 1");
    r.positive(s.learning_rate, path + ".learning_rate");
    r.positive(s.e_scale, path + ".e_scale");
    r.positive(s.de_scale, path + ".de_scale");
    if (b.contains("scenarios")) {
        const json& arr = b.at("scenarios");
        if (!arr.is_array()) {
            r.fail(path + ".scenarios", "must be an array");
        } else {
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string ip = path + ".scenarios[" + std::to_string(i) + "]";
                if (!arr[i].is_object()) {
                    r.fail(ip, "must be an object");
                    continue;
                }
                r.only_keys(arr[i], ip, {"Vref", "horizon", "profile", "start_duty"});
                TrainingScenario sc;
                sc.Vref = r.number(arr[i], "Vref", ip + ".Vref", sc.Vref);
                sc.horizon = r.number(arr[i], "horizon", ip + ".horizon", sc.horizon);
                r.positive(sc.horizon, ip + ".horizon");
                sc.profile = read_profile(r, arr[i], ip + ".profile");
                if (arr[i].contains("start_duty")) {
                    sc.start_duty = r.number(arr[i], "start_duty", ip + ".start_duty", 0.4);
                    r.open_unit(*sc.start_duty, ip + ".start_duty");
                }
                s.scenarios.push_back(sc);
            }
        }
    } else {
        s.scenarios = default_training_scenarios();
    }
    return s;
}

inline SimulateSettings read_simulate(Reader& r, const json& b, const std::string& path) {
    SimulateSettings s;
    r.only_keys(b, path, {"steps_per_phase", "fp_tol", "i_src", "sweep"});
    s.sim.steps_per_phase = static_cast<int>(r.integer(b, "steps_per_phase", path + ".steps_per_phase", 64));
    s.sim.fp_tol = r.number(b, "fp_tol", path + ".fp_tol", s.sim.fp_tol);
    s.i_src = r.number(b, "i_src", path + ".i_src", 0.0);
    s.sweep = r.numbers(b, "sweep", path + ".sweep");
    if (s.sim.steps_per_phase < 4) r.fail(path + ".steps_per_phase", "must be >= 4");
    r.positive(s.sim.fp_tol, path + ".fp_tol");
    for (std::size_t i = 0; i < s.sweep.size(); ++i) r.open_unit(s.sweep[i], path + ".sweep[" + std::to_string(i) + "]");
    return s;
}

inline DesignSettings read_design(Reader& r, const json& b, const std::string& path, const ConverterParams& p) {
    DesignSettings s;
    r.only_keys(b, path, {"Vin", "Vo", "ripple", "pv_panel"});
    SizingSpec& z = s.sizing;
    z.Vin = r.number(b, "Vin", path + ".Vin", p.Vpv);
    z.Vo = r.number(b, "Vo", path + ".Vo", 52.0);
    z.fs = p.fs;
    z.R = p.R;
    r.positive(z.Vin, path + ".Vin");
    r.positive(z.Vo, path + ".Vo");
    if (const json* rp = r.object(b, "ripple", path + ".ripple")) {
        const std::string pp = path + ".ripple";
        r.only_keys(*rp, pp, {"dI_L1", "dI_L2", "dI_L3", "dI_L4", "dV_C1", "dV_C2", "dV_Co"});
        z.dI_L1 = r.number(*rp, "dI_L1", pp + ".dI_L1", z.dI_L1);
        z.dI_L2 = r.number(*rp, "dI_L2", pp + ".dI_L2", z.dI_L2);
        z.dI_L3 = r.number(*rp, "dI_L3", pp + ".dI_L3", z.dI_L3);
        z.dI_L4 = r.number(*rp, "dI_L4", pp + ".dI_L4", z.dI_L4);
        z.dV_C1 = r.number(*rp, "dV_C1", pp + ".dV_C1", z.dV_C1);
        z.dV_C2 = r.number(*rp, "dV_C2", pp + ".dV_C2", z.dV_C2);
        z.dV_Co = r.number(*rp, "dV_Co", pp + ".dV_Co", z.dV_Co);
        for (const char* k : {"dI_L1", "dI_L2", "dI_L3", "dI_L4", "dV_C1", "dV_C2", "dV_Co"})
            if (rp->contains(k)) r.positive(rp->at(k).is_number() ? rp->at(k).get<double>() : 1.0, pp + "." + k);
    }
    if (const json* pv = r.object(b, "pv_panel", path + ".pv_panel")) {
        const std::string pp = path + ".pv_panel";
        r.only_keys(*pv, pp, {"Voc", "Isc", "Vmp", "Imp", "Pmax"});
        PvPanel panel;
        panel.Voc = r.number(*pv, "Voc", pp + ".Voc", panel.Voc);
        panel.Isc = r.number(*pv, "Isc", pp + ".Isc", panel.Isc);
        panel.Vmp = r.number(*pv, "Vmp", pp + ".Vmp", panel.Vmp);
        panel.Imp = r.number(*pv, "Imp", pp + ".Imp", panel.Imp);
        panel.Pmax = r.number(*pv, "Pmax", pp + ".Pmax", panel.Pmax);
        if (!(panel.Vmp > 0 && panel.Vmp < panel.Voc)) r.fail(pp + ".Vmp", "must satisfy 0 < Vmp < Voc");
        if (!(panel.Imp > 0 && panel.Imp < panel.Isc)) r.fail(pp + ".Imp", "must satisfy 0 < Imp < Isc");
        s.panel = panel;
    }
    return s;
}

inline StressSettings read_stress(Reader& r, const json& b, const std::string& path, const ConverterParams& p) {
    StressSettings s;
    r.only_keys(b, path, {"D", "Io", "Vpv", "Vbat", "Vo"});
    s.D = r.number(b, "D", path + ".D", p.D);
    s.Io = r.number(b, "Io", path + ".Io", s.Io);
    s.Vpv = r.number(b, "Vpv", path + ".Vpv", p.Vpv);
    s.Vbat = r.number(b, "Vbat", path + ".Vbat", p.Vbat);
    s.Vo = r.number(b, "Vo", path + ".Vo", s.Vpv * (3.0 - s.D));
    r.open_unit(s.D, path + ".D");
    r.non_negative(s.Io, path + ".Io");
    return s;
}

inline BodeSettings read_bode(Reader& r, const json& b, const std::string& path) {
    BodeSettings s;
    r.only_keys(b, path, {"input", "f_min", "f_max", "points", "identified"});
    const std::string in = r.string(b, "input", path + ".input", "duty");
    if (in == "duty") s.input = TfInput::Duty;
    else if (in == "source_voltage") s.input = TfInput::SourceVoltage;
    else if (in == "source_current") s.input = TfInput::SourceCurrent;
    else r.fail(path + ".input", "must be one of duty, source_voltage, source_current");
    s.f_min = r.number(b, "f_min", path + ".f_min", s.f_min);
    s.f_max = r.number(b, "f_max", path + ".f_max", s.f_max);
    s.points = r.integer(b, "points", path + ".points", s.points);
    if (b.contains("identified")) {
        if (!b.at("identified").is_boolean()) r.fail(path + ".identified", "must be a boolean");
        else s.identified = b.at("identified").get<bool>();
    }
    r.positive(s.f_min, path + ".f_min");
    if (!(s.f_max > s.f_min)) r.fail(path + ".f_max", "must exceed f_min");
    if (s.points < 1) r.fail(path + ".points", "must be >= 1");
    return s;
}

inline LossesSettings read_losses(Reader& r, const json& b, const std::string& path) {
    LossesSettings s;
    r.only_keys(b, path, {"inputs", "copper_mode", "P_out", "P_total_reference", "from_waveforms"});
    if (const json* in = r.object(b, "inputs", path + ".inputs", true)) {
        const std::string pp = path + ".inputs";
        r.only_keys(*in, pp, {"I_D_rms", "D", "Rds_on", "Vs", "Is", "T_on", "T_off", "fsw", "I_D_avg", "Vf",
                              "I_L_rms", "R_L", "I_Co_rms", "ESR"});
        LossInputs& li = s.inputs;
        std::pair<const char*, double*> fields[] = {
            {"I_D_rms", &li.I_D_rms}, {"D", &li.D},         {"Rds_on", &li.Rds_on},   {"Vs", &li.Vs},
            {"Is", &li.Is},           {"T_on", &li.T_on},   {"T_off", &li.T_off},     {"fsw", &li.fsw},
            {"I_D_avg", &li.I_D_avg}, {"Vf", &li.Vf},       {"I_L_rms", &li.I_L_rms}, {"R_L", &li.R_L},
            {"I_Co_rms", &li.I_Co_rms}, {"ESR", &li.ESR}};
        for (auto& [k, ptr] : fields) {
            *ptr = r.number(*in, k, pp + "." + k, 0.0);
            r.non_negative(*ptr, pp + "." + k);
        }
    }
    const std::string mode = r.string(b, "copper_mode", path + ".copper_mode", "paper_linear");
    if (mode == "paper_linear") s.mode = CopperMode::PaperLinear;
    else if (mode == "quadratic") s.mode = CopperMode::Quadratic;
    else r.fail(path + ".copper_mode", "must be paper_linear or quadratic");
    s.P_out = r.number(b, "P_out", path + ".P_out", s.P_out);
    r.positive(s.P_out, path + ".P_out");
    if (b.contains("P_total_reference")) {
        s.P_total_reference = r.number(b, "P_total_reference", path + ".P_total_reference", 0.0);
        r.non_negative(*s.P_total_reference, path + ".P_total_reference");
    }
    if (const json* fw = r.object(b, "from_waveforms", path + ".from_waveforms")) {
        const std::string pp = path + ".from_waveforms";
        r.only_keys(*fw, pp, {"T_on", "T_off"});
        SwitchingTimes st;
        st.T_on = r.number(*fw, "T_on", pp + ".T_on", 0.0);
        st.T_off = r.number(*fw, "T_off", pp + ".T_off", 0.0);
        r.non_negative(st.T_on, pp + ".T_on");
        r.non_negative(st.T_off, pp + ".T_off");
        s.from_waveforms = st;
    }
    return s;
}

inline CompareSettings read_compare(Reader& r, const json& b, const std::string& path, const ConverterParams& p) {
    CompareSettings s;
    r.only_keys(b, path, {"D", "ref9_n", "ref14_D2"});
    s.D = r.number(b, "D", path + ".D", p.D);
    s.options.ref9_n = r.number(b, "ref9_n", path + ".ref9_n", s.options.ref9_n);
    s.options.ref14_D2 = r.number(b, "ref14_D2", path + ".ref14_D2", s.options.ref14_D2);
    r.open_unit(s.D, path + ".D");
    r.non_negative(s.options.ref14_D2, path + ".ref14_D2");
    return s;
}

inline ClosedLoopSettings read_closedloop(Reader& r, const json& b, const std::string& path) {
    ClosedLoopSettings s;
    r.only_keys(b, path, {"controller", "Vref", "horizon", "profile", "pid", "train"});
    s.controller = r.string(b, "controller", path + ".controller", s.controller);
    if (s.controller != "pid" && s.controller != "anfis") r.fail(path + ".controller", "must be pid or anfis");
    s.Vref = r.number(b, "Vref", path + ".Vref", s.Vref);
    s.horizon = r.number(b, "horizon", path + ".horizon", s.horizon);
    r.positive(s.Vref, path + ".Vref");
    r.positive(s.horizon, path + ".horizon");
    s.profile = read_profile(r, b, path + ".profile");
    s.pid = read_pid(r, b, path + ".pid");
    if (const json* t = r.object(b, "train", path + ".train")) s.train = read_train(r, *t, path + ".train");
    else s.train = read_train(r, json::object(), path + ".train");
    if (!b.contains("train") || !b.at("train").contains("pid")) s.train.pid = s.pid;
    return s;
}

// ---------------------------------------------------------------------------
// Loading

struct LoadResult {
    std::optional<RunConfig> config;
    std::vector<FieldIssue> issues;
};

inline std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

inline std::optional<json> parse_file(const fs::path& path, std::vector<FieldIssue>& issues) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        issues.push_back({"<file>", "cannot read " + path.string()});
        return std::nullopt;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte);
        issues.push_back({"<file>", "parse error at line " + std::to_string(line) + ", column " +
                                        std::to_string(col) + ": " + e.what()});
        return std::nullopt;
    }
}

inline fs::path resolve_preset(const std::string& name, const fs::path& config_dir) {
    fs::path file = name;
    if (file.extension() != ".json") file += ".json";
    if (file.is_absolute()) return file;
    for (const fs::path& base : {config_dir, fs::path(MQBQR_PRESET_DIR)}) {
        const fs::path candidate = base / file;
        if (fs::exists(candidate)) return candidate;
    }
    return {};
}

inline LoadResult load(const fs::path& path, int depth = 0) {
    LoadResult res;
    Reader r;
    auto doc = parse_file(path, res.issues);
    if (!doc) return res;
    if (!doc->is_object()) {
        res.issues.push_back({"<root>", "configuration must be a JSON object"});
        return res;
    }
    const json& root = *doc;
    RunConfig cfg;

    if (!root.contains("schema")) r.fail("schema", "missing schema version");
    else if (!root.at("schema").is_number_integer() || root.at("schema").get<long>() != kSchemaVersion)
        r.fail("schema", "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");

    std::set<std::string> allowed = {"schema", "preset", "params", "variant", "output_dir",
                                     "seed",   "csv_precision", "derived_inputs", "description"};
    for (const auto& s : kScenarios) allowed.insert(s);
    for (auto it = root.begin(); it != root.end(); ++it)
        if (!allowed.count(it.key())) r.fail(it.key(), "unknown key");

    if (root.contains("preset")) {
        const std::string name = r.string(root, "preset", "preset", "");
        const fs::path pp = resolve_preset(name, path.parent_path());
        if (pp.empty() || depth > 4) {
            r.fail("preset", "preset '" + name + "' not found");
        } else {
            LoadResult base = load(pp, depth + 1);
            for (auto& i : base.issues) r.fail("preset(" + name + ")." + i.path, i.message);
            if (base.config) {
                cfg.params = base.config->params;
                cfg.variant = base.config->variant;
            }
        }
    }
    if (const json* p = r.object(root, "params", "params")) read_params(r, *p, "params", cfg.params);
    for (auto& i : check_params(cfg.params)) r.issues.push_back(i);

    const std::string variant = r.string(root, "variant", "variant", std::string(to_string(cfg.variant)));
    if (variant == "reconciled") cfg.variant = ModelVariant::Reconciled;
    else if (variant == "paper_literal") cfg.variant = ModelVariant::PaperLiteral;
    else r.fail("variant", "must be reconciled or paper_literal");

    cfg.output_dir = r.string(root, "output_dir", "output_dir", cfg.output_dir);
    if (cfg.output_dir.empty()) r.fail("output_dir", "must be non-empty");
    const long seed = r.integer(root, "seed", "seed", 1);
    if (seed < 0) r.fail("seed", "must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(std::max(seed, 0L));
    cfg.precision = static_cast<int>(r.integer(root, "csv_precision", "csv_precision", csv::kDefaultPrecision));
    if (cfg.precision < 1 || cfg.precision > 17) r.fail("csv_precision", "must lie in [1, 17]");
    if (root.contains("derived_inputs") && !root.at("derived_inputs").is_object())
        r.fail("derived_inputs", "must be an object");

    std::vector<std::string> present;
    for (const auto& s : kScenarios)
        if (root.contains(s)) present.push_back(s);
    if (depth == 0) {
        if (present.empty() && !root.contains("preset")) {
            r.fail("<scenario>", "exactly one scenario block is required");
        } else if (present.size() > 1) {
            std::string names;
            for (const auto& s : present) names += (names.empty() ? "" : ", ") + s;
            r.fail("<scenario>", "exactly one scenario block is allowed, found: " + names);
        }
    }
    if (present.size() == 1) {
        cfg.scenario = present.front();
        cfg.block = root.at(cfg.scenario);
    } else if (present.empty() && root.contains("preset") && depth == 0) {
        // Scenario inherited from the preset file.
        std::vector<FieldIssue> ignore;
        const fs::path pp = resolve_preset(r.string(root, "preset", "preset", ""), path.parent_path());
        if (!pp.empty()) {
            if (auto base = parse_file(pp, ignore); base && base->is_object()) {
                for (const auto& s : kScenarios)
                    if (base->contains(s)) {
                        cfg.scenario = s;
                        cfg.block = base->at(s);
                    }
            }
        }
        if (cfg.scenario.empty()) r.fail("<scenario>", "exactly one scenario block is required");
    }

    if (!cfg.scenario.empty() && !cfg.block.is_object()) {
        r.fail(cfg.scenario, "must be an object");
    } else if (!cfg.scenario.empty()) {
        const std::string& s = cfg.scenario;
        if (s == "simulate") read_simulate(r, cfg.block, s);
        else if (s == "design") read_design(r, cfg.block, s, cfg.params);
        else if (s == "stress") read_stress(r, cfg.block, s, cfg.params);
        else if (s == "bode") read_bode(r, cfg.block, s);
        else if (s == "losses") read_losses(r, cfg.block, s);
        else if (s == "compare") read_compare(r, cfg.block, s, cfg.params);
        else if (s == "train") read_train(r, cfg.block, s);
        else if (s == "closedloop") read_closedloop(r, cfg.block, s);
    }

    for (auto& i : r.issues) res.issues.push_back(std::move(i));
    if (res.issues.empty()) res.config = std::move(cfg);
    return res;
}

inline std::vector<FieldIssue> validate(const fs::path& path) { return load(path).issues; }

// ---------------------------------------------------------------------------
// Running

class OutputSet {
public:
    OutputSet(fs::path dir, int precision) : dir_(std::move(dir)), precision_(precision) {}

    template <class F>
    void write(const std::string& name, F&& body) {
        fs::create_directories(dir_);
        const fs::path p = dir_ / name;
        std::ofstream os(p, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + p.string());
        body(os);
        files_.push_back(p);
    }
    const std::vector<fs::path>& files() const { return files_; }
    int precision() const { return precision_; }

private:
    fs::path dir_;
    int precision_;
    std::vector<fs::path> files_;
};

inline void write_quantities(std::ostream& os, const std::vector<std::tuple<std::string, double, std::string>>& rows,
                             int precision) {
    csv::Writer w(os, precision);
    w.header({"quantity", "value", "unit"});
    for (const auto& [q, v, u] : rows) w.cell(q).cell(v).cell(u).end_row();
}

inline void write_discrepancies_csv(std::ostream& os, const std::vector<DiscrepancyEntry>& entries) {
    csv::Writer w(os);
    w.header({"kind", "location", "paper_literal_form", "reconciled_form", "matrix", "row", "col", "note"});
    for (const auto& e : entries)
        w.cell(to_string(e.kind)).cell(e.location).cell(e.paper_literal_form).cell(e.reconciled_form)
            .cell(to_string(e.cell.matrix)).cell(e.cell.row).cell(e.cell.col).cell(e.note).end_row();
}

struct TrainOutcome {
    AnfisController controller;
    TrainingSet data;
    std::vector<double> rmse_history;
};

inline TrainOutcome train_anfis_controller(const ConverterParams& p, ModelVariant variant, const TrainSettings& s,
                                           std::uint64_t seed) {
    TrainOutcome out;
    out.data = build_training_set(p, variant, s.pid, s.scenarios, seed, static_cast<std::size_t>(s.samples_per_scenario));
    out.controller.model = make_anfis(static_cast<int>(s.K), s.pid.bias);
    out.controller.e_scale = s.e_scale;
    out.controller.de_scale = s.de_scale;
    out.controller.D_min = s.pid.D_min;
    out.controller.D_max = s.pid.D_max;
    if (out.data.samples.empty()) throw DomainError("no training samples were produced");
    const auto pts = to_anfis_points(out.controller, out.data.samples, p.Ts());
    auto tr = anfis_train(out.controller.model, pts, static_cast<int>(s.epochs), s.learning_rate);
    out.controller.model = std::move(tr.model);
    out.rmse_history = std::move(tr.rmse_history);
    return out;
}

inline void write_anfis_csv(std::ostream& os, const AnfisModel& m, int precision) {
    csv::Writer w(os, precision);
    w.header({"kind", "index", "a", "b", "c"});
    for (std::size_t i = 0; i < m.mf1.size(); ++i)
        w.cell("mf_e").cell(static_cast<long>(i)).cell(m.mf1[i].left).cell(m.mf1[i].peak).cell(m.mf1[i].right).end_row();
    for (std::size_t i = 0; i < m.mf2.size(); ++i)
        w.cell("mf_de").cell(static_cast<long>(i)).cell(m.mf2[i].left).cell(m.mf2[i].peak).cell(m.mf2[i].right).end_row();
    for (std::size_t i = 0; i < m.rules.size(); ++i)
        w.cell("rule").cell(static_cast<long>(i)).cell(m.rules[i].p).cell(m.rules[i].q).cell(m.rules[i].r).end_row();
}

inline void run_scenario(const RunConfig& cfg, OutputSet& out, std::ostream& err) {
    Reader r;
    const int prec = out.precision();
    const ConverterParams& p = cfg.params;
    const std::string& s = cfg.scenario;

    if (s == "simulate") {
        const auto st = read_simulate(r, cfg.block, s);
        const SourceInputs u{p.Vpv, st.i_src};
        const auto ss = find_steady_state(p, cfg.variant, u, st.sim);
        for (const auto& w : ss.warnings) err << "warning: " << w << "\n";
        out.write("waveform.csv", [&](std::ostream& os) { write_waveform_csv(os, ss.cycle, prec); });
        out.write("measurements.csv", [&](std::ostream& os) { write_measurements_csv(os, ss.measurements, prec); });
        const auto bal = balance_check(ss);
        out.write("steady_state.csv", [&](std::ostream& os) {
            std::vector<std::tuple<std::string, double, std::string>> rows;
            for (int k = 0; k < kStates; ++k)
                rows.emplace_back("x_periodic_" + std::string(kStateNames[k]), ss.x_periodic(k), k < 4 ? "A" : "V");
            rows.emplace_back("spectral_radius", ss.spectral_radius, "");
            rows.emplace_back("fixed_point_residual", ss.residual, "");
            for (int k = 0; k < 4; ++k) rows.emplace_back("volt_sec_" + std::string(kStateNames[k]), bal.volt_sec[k], "V*s");
            for (int k = 0; k < 3; ++k) rows.emplace_back("charge_" + std::string(kStateNames[4 + k]), bal.charge[k], "A*s");
            rows.emplace_back("gain_observed", ss.measurements.avg_Vo / p.Vpv, "");
            rows.emplace_back("gain_formula", ideal_gain(p.D), "");
            write_quantities(os, rows, prec);
        });
        out.write("discrepancies.csv", [&](std::ostream& os) { write_discrepancies_csv(os, discrepancy_report(p)); });
        if (!st.sweep.empty()) {
            const auto rows = sweep(p, st.sweep, cfg.variant, st.sim);
            for (const auto& row : rows)
                if (!row.ok) err << "warning: sweep D=" << row.D << ": " << row.error << "\n";
            out.write("sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, rows, prec); });
        }
    } else if (s == "design") {
        const auto st = read_design(r, cfg.block, s, p);
        SizingSpec z = st.sizing;
        z.D = duty_for_output(z.Vin, z.Vo);
        const auto c = size_components(z);
        out.write("design.csv", [&](std::ostream& os) {
            std::vector<std::tuple<std::string, double, std::string>> rows = {
                {"D", z.D, ""},   {"gain", ideal_gain(z.D), ""}, {"L1", c.L1, "H"}, {"L2", c.L2, "H"},
                {"L3", c.L3, "H"}, {"L4", c.L4, "H"},            {"C1", c.C1, "F"}, {"C2", c.C2, "F"},
                {"Co", c.Co, "F"}};
            if (st.panel) {
                const auto pv = fit_pv(*st.panel);
                const auto mpp = pv_mpp(pv);
                if (!pv.pmax_note.empty()) err << "warning: " << pv.pmax_note << "\n";
                rows.insert(rows.end(), {{"pv_a", pv.a, "V"},
                                         {"pv_I0", pv.I0, "A"},
                                         {"pv_fit_residual", pv.fit_residual, ""},
                                         {"pv_Vmp_times_Imp", pv.pmax_from_mpp_point, "W"},
                                         {"pv_Pmax_rated", st.panel->Pmax, "W"},
                                         {"pv_mpp_V", mpp.V, "V"},
                                         {"pv_mpp_I", mpp.I, "A"},
                                         {"pv_mpp_P", mpp.P, "W"}});
            }
            write_quantities(os, rows, prec);
        });
    } else if (s == "stress") {
        const auto st = read_stress(r, cfg.block, s, p);
        const auto rep = device_stress_report(st.D, st.Io, st.Vpv, st.Vbat, st.Vo);
        out.write("stress.csv", [&](std::ostream& os) {
            write_quantities(os,
                             {{"V_switch", rep.V_switch, "V"}, {"V_D1", rep.V_D1, "V"},   {"V_D2", rep.V_D2, "V"},
                              {"V_D3", rep.V_D3, "V"},         {"V_D4", rep.V_D4, "V"},   {"V_D34_alt", rep.V_D34_alt, "V"},
                              {"V_D5", rep.V_D5, "V"},         {"V_D6", rep.V_D6, "V"},   {"V_D6_alt", rep.V_D6_alt, "V"},
                              {"V_D7", rep.V_D7, "V"},         {"I_in", rep.I_in, "A"},   {"I_L1", rep.I_L1, "A"},
                              {"I_L2", rep.I_L2, "A"},         {"I_L3", rep.I_L3, "A"},   {"I_L4", rep.I_L4, "A"},
                              {"I_Q", rep.I_Q, "A"},           {"I_D1", rep.I_D1, "A"},   {"I_D2", rep.I_D2, "A"},
                              {"I_D3", rep.I_D3, "A"},         {"I_D4", rep.I_D4, "A"},   {"I_D5", rep.I_D5, "A"},
                              {"I_D6", rep.I_D6, "A"},         {"I_D7", rep.I_D7, "A"},   {"I_Do", rep.I_Do, "A"}},
                             prec);
        });
        out.write("stress_flags.csv", [&](std::ostream& os) {
            csv::Writer w(os);
            w.header({"field", "message"});
            for (const auto& f : rep.flags) w.cell(f.field).cell(f.message).end_row();
        });
    } else if (s == "bode") {
        const auto st = read_bode(r, cfg.block, s);
        const auto avg = assemble_averaged(p, cfg.variant);
        const SourceInputs u = nominal_inputs(p);
        const StateVector x_op = equilibrium(avg, u);
        const auto tf = transfer_function(avg, st.input, x_op, u);
        const auto freqs = log_space(st.f_min, st.f_max, static_cast<int>(st.points));
        const auto g = frequency_response(avg, input_column(avg, st.input, x_op, u), freqs);
        out.write("bode.csv", [&](std::ostream& os) { write_bode_csv(os, freqs, g, prec); });
        out.write("transfer_function.csv", [&](std::ostream& os) {
            csv::Writer w(os, prec);
            w.header({"power", "numerator", "denominator"});
            const int n = static_cast<int>(tf.den.size()) - 1;
            for (int k = 0; k <= n; ++k) {
                const int num_idx = k - (n + 1 - static_cast<int>(tf.num.size()));
                w.cell(n - k).cell(num_idx >= 0 ? tf.num[num_idx] : 0.0).cell(tf.den[k]).end_row();
            }
        });
        if (st.identified) {
            std::vector<Complex> gi;
            for (double f : freqs) gi.push_back(identified_reference_eval(Complex(0.0, 2.0 * std::numbers::pi * f)));
            out.write("bode_identified.csv", [&](std::ostream& os) { write_bode_csv(os, freqs, gi, prec); });
        }
    } else if (s == "losses") {
        const auto st = read_losses(r, cfg.block, s);
        const auto b = loss_breakdown(st.inputs, st.mode);
        out.write("losses.csv", [&](std::ostream& os) { write_loss_csv(os, b, prec); });
        out.write("efficiency.csv", [&](std::ostream& os) {
            std::vector<std::tuple<std::string, double, std::string>> rows = {
                {"P_out", st.P_out, "W"},
                {"P_total", b.P_total, "W"},
                {"P_switch_total", b.P_switch(), "W"},
                {"efficiency_component_sum", efficiency(st.P_out, b), "%"}};
            if (st.P_total_reference) {
                rows.emplace_back("P_total_reference", *st.P_total_reference, "W");
                rows.emplace_back("efficiency_reference", efficiency(st.P_out, *st.P_total_reference), "%");
            }
            write_quantities(os, rows, prec);
        });
        if (st.from_waveforms) {
            const auto ss = find_steady_state(p, cfg.variant, nominal_inputs(p));
            const auto wl = breakdown_from_waveforms(ss, p, *st.from_waveforms, st.mode);
            for (const auto& w : wl.warnings) err << "warning: " << w << "\n";
            out.write("losses_waveform.csv", [&](std::ostream& os) { write_loss_csv(os, wl.breakdown, prec); });
        }
    } else if (s == "compare") {
        const auto st = read_compare(r, cfg.block, s, p);
        const auto rows = topology_comparison(st.D, st.options);
        out.write("comparison.csv", [&](std::ostream& os) { write_comparison_csv(os, rows, prec); });
        out.write("comparison.md", [&](std::ostream& os) { write_comparison_markdown(os, rows); });
    } else if (s == "train") {
        const auto st = read_train(r, cfg.block, s);
        const auto t = train_anfis_controller(p, cfg.variant, st, cfg.seed);
        for (const auto& w : t.data.warnings) err << "warning: " << w << "\n";
        out.write("training_set.csv", [&](std::ostream& os) { write_training_csv(os, t.data.samples, prec); });
        out.write("rmse.csv", [&](std::ostream& os) { write_rmse_csv(os, t.rmse_history, prec); });
        out.write("anfis_model.csv", [&](std::ostream& os) { write_anfis_csv(os, t.controller.model, prec); });
    } else if (s == "closedloop") {
        const auto st = read_closedloop(r, cfg.block, s);
        Controller ctrl = st.pid;
        if (st.controller == "anfis") {
            const auto t = train_anfis_controller(p, cfg.variant, st.train, cfg.seed);
            for (const auto& w : t.data.warnings) err << "warning: " << w << "\n";
            ctrl = t.controller;
            out.write("rmse.csv", [&](std::ostream& os) { write_rmse_csv(os, t.rmse_history, prec); });
        }
        const auto res = closed_loop_simulate(p, cfg.variant, ctrl, st.Vref, st.profile, st.horizon);
        out.write("closedloop.csv", [&](std::ostream& os) { write_closed_loop_csv(os, res, prec); });
        out.write("closedloop_metrics.csv", [&](std::ostream& os) {
            write_quantities(os,
                             {{"settled", res.metrics.settled ? 1.0 : 0.0, ""},
                              {"settling_time", res.metrics.settling_time, "s"},
                              {"overshoot", res.metrics.overshoot_pct, "%"},
                              {"steady_state_error", res.metrics.steady_state_error, "V"},
                              {"final_max_error", res.metrics.final_max_error, "V"}},
                             prec);
        });
    }
}

// Loads, validates and runs one configuration. Every written file is listed on `out`.
inline int run(const fs::path& path, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    const LoadResult lr = load(path);
    if (!lr.config) {
        for (const auto& i : lr.issues) err << "error: " << i.path << ": " << i.message << "\n";
        return kValidationFailure;
    }
    const RunConfig& cfg = *lr.config;
    fs::path dir = cfg.output_dir;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) dir = env;
    else if (dir.is_relative()) dir = path.parent_path() / dir;
    OutputSet files(dir, cfg.precision);
    int code = kOk;
    try {
        run_scenario(cfg, files, err);
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        code = kValidationFailure;
    } catch (const Error& e) {
        err << "numerical failure: " << e.what() << "\n";
        code = kNumericalFailure;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << "\n";
        code = kNumericalFailure;
    }
    for (const auto& f : files.files()) out << f.string() << "\n";
    return code;
}

}  // namespace mqbqr::config
