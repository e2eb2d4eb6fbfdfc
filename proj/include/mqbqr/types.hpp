#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mqbqr/errors.hpp"

namespace mqbqr {

inline constexpr int kStates = 7;
inline constexpr int kInputs = 2;

using StateVector = Eigen::Matrix<double, kStates, 1>;
using StateMatrix = Eigen::Matrix<double, kStates, kStates>;
using InputMatrix = Eigen::Matrix<double, kStates, kInputs>;
using InputVector = Eigen::Matrix<double, kInputs, 1>;

// Fixed ordering of the state vector.
enum StateIndex : int { iL1 = 0, iL2, iL3, iL4, vC1, vC2, vCo };

inline constexpr std::array<std::string_view, kStates> kStateNames = {
    "iL1", "iL2", "iL3", "iL4", "vC1", "vC2", "vCo"};

struct Parasitics {
    double Rds_on = 0.0;      // switch on-resistance, ohm
    double Vf_diode = 0.0;    // diode forward drop, V
    double RL_copper = 0.0;   // winding resistance of every inductor, ohm
    double esr_cap = 0.0;     // capacitor ESR, ohm
};

struct ConverterParams {
    double L1 = 2e-3;
    double L2 = 2e-3;
    double L3 = 150e-3;
    double L4 = 150e-3;
    double C1 = 100e-6;
    double C2 = 100e-6;
    double Co = 100e-6;
    double R = 1000.0;
    double Vpv = 20.0;
    double Vbat = 12.0;
    double fs = 50e3;
    double D = 0.4;
    Parasitics parasitics{};

    double Ts() const { return 1.0 / fs; }
    std::array<double, 4> inductances() const { return {L1, L2, L3, L4}; }
    std::array<double, 3> capacitances() const { return {C1, C2, Co}; }
};

// One violated invariant, addressed by a dotted field path ("params.D").
struct FieldIssue {
    std::string path;
    std::string message;
};

inline std::vector<FieldIssue> check_params(const ConverterParams& p, const std::string& prefix = "params") {
    std::vector<FieldIssue> issues;
    auto positive = [&](const char* name, double v) {
        if (!std::isfinite(v) || !(v > 0.0))
            issues.push_back({prefix + "." + name, "must be finite and > 0"});
    };
    auto non_negative = [&](const char* name, double v) {
        if (!std::isfinite(v) || v < 0.0)
            issues.push_back({prefix + ".parasitics." + name, "must be finite and >= 0"});
    };
    positive("L1", p.L1);
    positive("L2", p.L2);
    positive("L3", p.L3);
    positive("L4", p.L4);
    positive("C1", p.C1);
    positive("C2", p.C2);
    positive("Co", p.Co);
    positive("R", p.R);
    positive("fs", p.fs);
    if (!std::isfinite(p.Vpv)) issues.push_back({prefix + ".Vpv", "must be finite"});
    if (!std::isfinite(p.Vbat)) issues.push_back({prefix + ".Vbat", "must be finite"});
    if (!std::isfinite(p.D) || !(p.D > 0.0 && p.D < 1.0))
        issues.push_back({prefix + ".D", "duty ratio must lie in (0, 1)"});
    non_negative("Rds_on", p.parasitics.Rds_on);
    non_negative("Vf_diode", p.parasitics.Vf_diode);
    non_negative("RL_copper", p.parasitics.RL_copper);
    non_negative("esr_cap", p.parasitics.esr_cap);
    return issues;
}

inline void require_valid(const ConverterParams& p) {
    auto issues = check_params(p);
    if (!issues.empty()) throw DomainError(issues.front().path + ": " + issues.front().message);
}

struct SourceInputs {
    double v_src = 0.0;  // source voltage, V
    double i_src = 0.0;  // injected current, A

    InputVector vec() const { return InputVector(v_src, i_src); }
};

// Sources taken from the parameter set: v_src = Vpv, no injection.
inline SourceInputs nominal_inputs(const ConverterParams& p) { return {p.Vpv, 0.0}; }

enum class SwitchPhase { On, Off };

inline std::string_view to_string(SwitchPhase ph) { return ph == SwitchPhase::On ? "on" : "off"; }

// The switch conducts for the first D*Ts of each period.
inline double phase_duration(const ConverterParams& p, SwitchPhase ph) {
    return ph == SwitchPhase::On ? p.D / p.fs : (1.0 - p.D) / p.fs;
}

enum class ModelVariant { PaperLiteral, Reconciled };

inline std::string_view to_string(ModelVariant v) {
    return v == ModelVariant::PaperLiteral ? "paper_literal" : "reconciled";
}

}  // namespace mqbqr
