#pragma once

#include <array>
#include <string>
#include <vector>

#include "mqbqr/types.hpp"

namespace mqbqr {

// Per-phase affine model dx/dt = A x + B u + f.
struct PhaseModel {
    StateMatrix A = StateMatrix::Zero();
    InputMatrix B = InputMatrix::Zero();
    StateVector f = StateVector::Zero();
    SwitchPhase phase = SwitchPhase::On;
    ModelVariant variant = ModelVariant::Reconciled;
};

namespace detail {

// Natural scale of a coefficient cell: inductor rows carry 1/L, capacitor rows 1/C,
// and the output-capacitor diagonal 1/(R Co).
inline double cell_scale(const ConverterParams& p, int row, int col) {
    switch (row) {
        case iL1: return 1.0 / p.L1;
        case iL2: return 1.0 / p.L2;
        case iL3: return 1.0 / p.L3;
        case iL4: return 1.0 / p.L4;
        case vC1: return 1.0 / p.C1;
        case vC2: return 1.0 / p.C2;
        default: return col == vCo ? 1.0 / (p.R * p.Co) : 1.0 / p.Co;
    }
}

}  // namespace detail

// One coefficient where the reconciled model departs from the literal mode equations.
struct VariantFix {
    SwitchPhase phase;
    int row;
    int col;
    double literal_multiplier;     // entry = multiplier * cell_scale
    double reconciled_multiplier;
    const char* location;
    const char* literal_form;
    const char* reconciled_form;
    const char* reason;
};

// The complete set of reconciliation edits. Nothing outside this table differs
// between ModelVariant::PaperLiteral and ModelVariant::Reconciled.
inline const std::vector<VariantFix>& variant_fixes() {
    static const std::vector<VariantFix> fixes = {
        {SwitchPhase::On, iL1, vC1, 1.0, 0.0, "on.diL1/dt", "+vC1/L1", "0",
         "inductor voltage while Q conducts is the PV voltage alone"},
        {SwitchPhase::On, vC1, iL1, 1.0, 0.0, "on.dvC1/dt", "+iL1/C1", "0",
         "L1 is not connected to C1 while Q conducts (partner of on.diL1/dt)"},
        {SwitchPhase::On, vC1, iL2, -1.0, 0.0, "on.dvC1/dt", "-iL2/C1", "0",
         "L2 sees only the PV voltage while Q conducts"},
        {SwitchPhase::On, vC1, iL3, 0.0, -1.0, "on.dvC1/dt", "0", "-iL3/C1",
         "C1 supplies the +vC1/L3 magnetising voltage, so it carries -iL3"},
        {SwitchPhase::Off, iL1, vC1, 1.0, -1.0, "off.diL1/dt", "+vC1/L1", "-vC1/L1",
         "L1 demagnetises into C1, which is charged by +iL1"},
        {SwitchPhase::Off, iL3, vC2, 1.0, -1.0, "off.diL3/dt", "+vC2/L3", "-vC2/L3",
         "L3 demagnetises into C2, which is charged by +iL3"},
        {SwitchPhase::Off, iL4, vC2, -1.0, 1.0, "off.diL4/dt", "-vC2/L4", "+vC2/L4",
         "C2 discharges -iL4 into L4, so L4 sees +vC2"},
        {SwitchPhase::Off, iL4, vCo, 1.0, 0.0, "off.diL4/dt", "+vCo/L4", "0",
         "Do is reverse biased while Q is off; the output branch carries no iL4"},
        {SwitchPhase::Off, vC1, iL2, 0.0, 1.0, "off.dvC1/dt", "0", "+iL2/C1",
         "L2 sees -vC1, so it charges C1 with +iL2"},
        {SwitchPhase::Off, vCo, vCo, 1.0, -1.0, "off.dvCo/dt", "+vCo/(R*Co)", "-vCo/(R*Co)",
         "the load resistor can only dissipate"},
    };
    return fixes;
}

inline PhaseModel build_phase_model(const ConverterParams& p, SwitchPhase phase, ModelVariant variant) {
    PhaseModel m;
    m.phase = phase;
    m.variant = variant;
    StateMatrix& A = m.A;
    if (phase == SwitchPhase::On) {
        A(iL1, vC1) = 1.0 / p.L1;
        m.B(iL1, 0) = 1.0 / p.L1;
        m.B(iL2, 0) = 1.0 / p.L2;
        A(iL3, vC1) = 1.0 / p.L3;
        A(iL4, vC2) = 1.0 / p.L4;
        A(iL4, vCo) = -1.0 / p.L4;
        m.f(iL4) = p.Vbat / p.L4;
        A(vC1, iL1) = 1.0 / p.C1;
        A(vC1, iL2) = -1.0 / p.C1;
        m.B(vC1, 1) = 1.0 / p.C1;
        A(vC2, iL4) = -1.0 / p.C2;
        m.B(vC2, 1) = 1.0 / p.C2;
        A(vCo, iL4) = 1.0 / p.Co;
        A(vCo, vCo) = -1.0 / (p.R * p.Co);
    } else {
        A(iL1, vC1) = 1.0 / p.L1;
        A(iL2, vC1) = -1.0 / p.L2;
        A(iL3, vC1) = 1.0 / p.L3;
        A(iL3, vC2) = 1.0 / p.L3;
        A(iL4, vC2) = -1.0 / p.L4;
        A(iL4, vCo) = 1.0 / p.L4;
        A(vC1, iL1) = 1.0 / p.C1;
        A(vC1, iL3) = -1.0 / p.C1;
        A(vC2, iL3) = 1.0 / p.C2;
        A(vC2, iL4) = -1.0 / p.C2;
        A(vCo, vCo) = 1.0 / (p.R * p.Co);
    }
    if (variant == ModelVariant::Reconciled) {
        for (const auto& fix : variant_fixes()) {
            if (fix.phase != phase) continue;
            A(fix.row, fix.col) = fix.reconciled_multiplier * detail::cell_scale(p, fix.row, fix.col);
        }
    }
    const auto L = p.inductances();
    for (int k = 0; k < 4; ++k) A(k, k) -= p.parasitics.RL_copper / L[k];
    return m;
}

inline StateVector state_derivative(const PhaseModel& m, const StateVector& x, const SourceInputs& u) {
    return m.A * x + m.B * u.vec() + m.f;
}

// Stored energy 1/2 (sum L i^2 + sum C v^2), J.
inline double stored_energy(const ConverterParams& p, const StateVector& x) {
    const auto L = p.inductances();
    const auto C = p.capacitances();
    double e = 0.0;
    for (int k = 0; k < 4; ++k) e += 0.5 * L[k] * x(k) * x(k);
    for (int k = 0; k < 3; ++k) e += 0.5 * C[k] * x(4 + k) * x(4 + k);
    return e;
}

// dE/dt along the model's trajectory through x.
inline double energy_rate(const ConverterParams& p, const PhaseModel& m, const StateVector& x,
                          const SourceInputs& u) {
    Eigen::Matrix<double, kStates, 1> w;
    const auto L = p.inductances();
    const auto C = p.capacitances();
    for (int k = 0; k < 4; ++k) w(k) = L[k] * x(k);
    for (int k = 0; k < 3; ++k) w(4 + k) = C[k] * x(4 + k);
    return w.dot(state_derivative(m, x, u));
}

// ---------------------------------------------------------------------------
// Diode conduction

inline constexpr int kDiodes = 8;
inline constexpr std::array<std::string_view, kDiodes> kDiodeNames = {"D1", "D2", "D3", "D4",
                                                                       "D5", "D6", "D7", "Do"};

struct DiodeSet {
    std::array<bool, kDiodes> conducting{};

    bool operator[](int k) const { return conducting[k]; }
    int count() const {
        int n = 0;
        for (bool b : conducting) n += b ? 1 : 0;
        return n;
    }
    friend bool operator==(const DiodeSet&, const DiodeSet&) = default;
};

inline DiodeSet conduction_set(SwitchPhase phase) {
    DiodeSet s;
    if (phase == SwitchPhase::On) {
        s.conducting = {true, false, true, false, true, false, false, true};
    } else {
        s.conducting = {false, true, false, true, false, true, true, false};
    }
    return s;
}

// ---------------------------------------------------------------------------
// Printed averaged matrices, evaluated at the parameter set.

struct PrintedCell {
    int row;
    int col;
    const char* form;
};

// Non-zero entries of the printed averaged state matrix, symbolic form kept as text.
inline StateMatrix printed_average_A(const ConverterParams& p) {
    const double D = p.D;
    StateMatrix A = StateMatrix::Zero();
    A(iL1, vC1) = 1.0 / p.L1;
    A(iL2, vC1) = -(1.0 - D) / p.L2;
    A(iL3, vC1) = 1.0 / p.L3;
    A(iL3, vC2) = (D - 1.0) / p.L3;
    A(iL4, vC1) = D / p.L4;
    A(iL4, vC2) = -(D - 1.0) / p.L4;
    A(vC1, iL1) = 1.0 / p.C1;
    A(vC1, iL2) = -D / p.C1;
    A(vC1, iL3) = -(D - 1.0) / p.C1;
    A(vC2, iL3) = (1.0 - D) / p.C2;
    A(vC2, iL4) = -1.0 / p.C2;
    A(vCo, iL4) = -D / p.Co;
    A(vCo, vCo) = (1.0 - D) / (p.R * p.Co);
    return A;
}

inline InputMatrix printed_average_B(const ConverterParams& p) {
    const double D = p.D;
    InputMatrix B = InputMatrix::Zero();
    B(iL1, 0) = D / p.L1;
    B(iL2, 0) = D / p.L2;
    B(iL4, 0) = -D / p.L4;
    B(vC1, 1) = D / p.C1;
    B(vC2, 1) = D / p.C2;
    return B;
}

// ---------------------------------------------------------------------------
// Discrepancy report

enum class DiscrepancyKind {
    VariantFix,       // cell differs between PaperLiteral and Reconciled phase models
    PrintedAverage,   // duty-weighted literal assembly differs from the printed averaged matrix
    CrossCheck,       // two source statements disagree; both variants keep the same cell
};

enum class MatrixId { A_on, A_off, A_av, B_av };

inline std::string_view to_string(DiscrepancyKind k) {
    switch (k) {
        case DiscrepancyKind::VariantFix: return "variant_fix";
        case DiscrepancyKind::PrintedAverage: return "printed_average";
        default: return "cross_check";
    }
}

inline std::string_view to_string(MatrixId m) {
    switch (m) {
        case MatrixId::A_on: return "A_on";
        case MatrixId::A_off: return "A_off";
        case MatrixId::A_av: return "A_av";
        default: return "B_av";
    }
}

struct MatrixCell {
    MatrixId matrix;
    int row;
    int col;
    friend bool operator==(const MatrixCell&, const MatrixCell&) = default;
};

struct DiscrepancyEntry {
    DiscrepancyKind kind;
    std::string location;
    std::string paper_literal_form;
    std::string reconciled_form;
    MatrixCell cell;
    std::string note;
};

namespace detail {

struct PrintedMismatch {
    MatrixCell cell;
    const char* location;
    const char* printed_form;
    const char* assembled_form;
};

// Cells where the printed averaged matrices disagree with the duty-weighted
// assembly of the literal mode equations.
inline const std::vector<PrintedMismatch>& printed_mismatches() {
    static const std::vector<PrintedMismatch> table = {
        {{MatrixId::A_av, iL3, vC2}, "averaged A row 3", "(D-1)/L3", "(1-D)/L3"},
        {{MatrixId::A_av, iL4, vC1}, "averaged A row 4", "D/L4", "0"},
        {{MatrixId::A_av, iL4, vC2}, "averaged A row 4", "-(D-1)/L4", "(2D-1)/L4"},
        {{MatrixId::A_av, iL4, vCo}, "averaged A row 4", "0", "(1-2D)/L4"},
        {{MatrixId::A_av, vC1, iL3}, "averaged A row 5", "-(D-1)/C1", "(D-1)/C1"},
        {{MatrixId::A_av, vCo, iL4}, "averaged A row 7", "-D/Co", "D/Co"},
        {{MatrixId::A_av, vCo, vCo}, "averaged A row 7", "(1-D)/(R*Co)", "(1-2D)/(R*Co)"},
        {{MatrixId::B_av, iL4, 0}, "averaged B row 4", "-D/L4 (source voltage column)",
         "0 (battery enters as affine +Vbat/L4 while Q conducts)"},
    };
    return table;
}

inline ConverterParams ideal(ConverterParams p) {
    p.parasitics = Parasitics{};
    return p;
}

}  // namespace detail

// Literal duty-weighted average, ideal parts.
inline StateMatrix literal_average_A(const ConverterParams& p) {
    const auto q = detail::ideal(p);
    const auto on = build_phase_model(q, SwitchPhase::On, ModelVariant::PaperLiteral);
    const auto off = build_phase_model(q, SwitchPhase::Off, ModelVariant::PaperLiteral);
    return q.D * on.A + (1.0 - q.D) * off.A;
}

inline InputMatrix literal_average_B(const ConverterParams& p) {
    const auto q = detail::ideal(p);
    const auto on = build_phase_model(q, SwitchPhase::On, ModelVariant::PaperLiteral);
    const auto off = build_phase_model(q, SwitchPhase::Off, ModelVariant::PaperLiteral);
    return q.D * on.B + (1.0 - q.D) * off.B;
}

// Ordered, deterministic list of every place the model departs from, or cannot
// agree with, the source statements. Entries whose two forms happen to coincide
// numerically at `params` (e.g. (2D-1)/L4 vs -(D-1)/L4 at D = 2/3) are omitted.
inline std::vector<DiscrepancyEntry> discrepancy_report(const ConverterParams& params) {
    std::vector<DiscrepancyEntry> out;
    const auto q = detail::ideal(params);

    for (const auto& fix : variant_fixes()) {
        const double s = detail::cell_scale(q, fix.row, fix.col);
        if (fix.literal_multiplier * s == fix.reconciled_multiplier * s) continue;
        out.push_back({DiscrepancyKind::VariantFix, fix.location, fix.literal_form, fix.reconciled_form,
                       {fix.phase == SwitchPhase::On ? MatrixId::A_on : MatrixId::A_off, fix.row, fix.col},
                       fix.reason});
    }

    const StateMatrix printed_A = printed_average_A(q);
    const InputMatrix printed_B = printed_average_B(q);
    const StateMatrix assembled_A = literal_average_A(q);
    const InputMatrix assembled_B = literal_average_B(q);
    for (const auto& mm : detail::printed_mismatches()) {
        const bool is_a = mm.cell.matrix == MatrixId::A_av;
        const double pv = is_a ? printed_A(mm.cell.row, mm.cell.col) : printed_B(mm.cell.row, mm.cell.col);
        const double av = is_a ? assembled_A(mm.cell.row, mm.cell.col) : assembled_B(mm.cell.row, mm.cell.col);
        if (pv == av) continue;
        out.push_back({DiscrepancyKind::PrintedAverage, mm.location, mm.printed_form, mm.assembled_form, mm.cell,
                       "printed averaged matrix vs duty-weighted mode equations"});
    }

    out.push_back({DiscrepancyKind::CrossCheck, "on.diL4/dt", "+vC2/L4 (mode equation)",
                   "-vC2 (inductor-voltage statement); mode equation kept",
                   {MatrixId::A_on, iL4, vC2},
                   "battery-loop polarity is stated both ways; both variants keep the mode equation"});
    out.push_back({DiscrepancyKind::CrossCheck, "off.diL1/dt + off.diL2/dt", "vC1/L1 - vC1/L2 (mode equations)",
                   "L1 and L2 voltages sum to 2 Vpv - vC1 (loop statement)",
                   {MatrixId::A_off, iL2, vC1},
                   "per-inductor split of the summed loop voltage is unstated; -vC1/L2 kept"});
    return out;
}

}  // namespace mqbqr
