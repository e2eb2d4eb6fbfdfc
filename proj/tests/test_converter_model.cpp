#include <random>
#include <set>

#include <catch_amalgamated.hpp>

#include "mqbqr/converter_model.hpp"

using namespace mqbqr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

StateVector random_state(std::mt19937_64& rng, double scale_i = 2.0, double scale_v = 100.0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    StateVector x;
    for (int k = 0; k < 4; ++k) x(k) = scale_i * u(rng);
    for (int k = 4; k < kStates; ++k) x(k) = scale_v * u(rng);
    return x;
}

}  // namespace

TEST_CASE("on-phase magnetising entry of L3", "[converter-model]") {
    const ConverterParams p;
    const auto m = build_phase_model(p, SwitchPhase::On, ModelVariant::Reconciled);
    CHECK_THAT(m.A(2, 4), WithinRel(1.0 / 150e-3, 1e-15));
    CHECK_THAT(m.A(2, 4), WithinAbs(6.667, 1e-3));
}

TEST_CASE("off-phase L2 entry", "[converter-model]") {
    const ConverterParams p;
    for (auto v : {ModelVariant::PaperLiteral, ModelVariant::Reconciled}) {
        const auto m = build_phase_model(p, SwitchPhase::Off, v);
        CHECK(m.A(1, 4) == -500.0);
    }
}

TEST_CASE("output capacitor sign per variant", "[converter-model]") {
    const ConverterParams p;
    CHECK(build_phase_model(p, SwitchPhase::Off, ModelVariant::Reconciled).A(6, 6) == -10.0);
    CHECK(build_phase_model(p, SwitchPhase::Off, ModelVariant::PaperLiteral).A(6, 6) == 10.0);
}

TEST_CASE("battery enters as on-phase affine offset", "[converter-model]") {
    const ConverterParams p;
    const auto on = build_phase_model(p, SwitchPhase::On, ModelVariant::Reconciled);
    const auto off = build_phase_model(p, SwitchPhase::Off, ModelVariant::Reconciled);
    CHECK_THAT(on.f(iL4), WithinRel(12.0 / 150e-3, 1e-15));
    CHECK(on.f.norm() == std::abs(on.f(iL4)));
    CHECK(off.f.isZero(0.0));
}

TEST_CASE("winding resistance lands on inductor diagonals only", "[converter-model]") {
    ConverterParams p;
    p.parasitics.RL_copper = 2.0;
    const ConverterParams q;
    for (auto ph : {SwitchPhase::On, SwitchPhase::Off}) {
        const StateMatrix d = build_phase_model(p, ph, ModelVariant::Reconciled).A -
                              build_phase_model(q, ph, ModelVariant::Reconciled).A;
        const auto L = p.inductances();
        for (int r = 0; r < kStates; ++r)
            for (int c = 0; c < kStates; ++c) {
                const double expect = (r == c && r < 4) ? -2.0 / L[r] : 0.0;
                CHECK_THAT(d(r, c), WithinAbs(expect, 1e-12));
            }
    }
}

TEST_CASE("state derivative", "[converter-model]") {
    const ConverterParams p;
    SECTION("zero state, zero input, zero offset") {
        auto m = build_phase_model(p, SwitchPhase::Off, ModelVariant::Reconciled);
        CHECK(state_derivative(m, StateVector::Zero(), {0.0, 0.0}).isZero(0.0));
    }
    SECTION("linear in x without inputs") {
        auto m = build_phase_model(p, SwitchPhase::On, ModelVariant::Reconciled);
        m.f.setZero();
        std::mt19937_64 rng(7);
        const StateVector x = random_state(rng);
        const StateVector d1 = state_derivative(m, x, {0.0, 0.0});
        const StateVector d2 = state_derivative(m, 2.0 * x, {0.0, 0.0});
        CHECK((d2 - 2.0 * d1).norm() <= 1e-12 * d2.norm());
    }
    SECTION("on-phase L3 rate at vC1 = 20 V") {
        const auto m = build_phase_model(p, SwitchPhase::On, ModelVariant::Reconciled);
        StateVector x = StateVector::Zero();
        x(vC1) = 20.0;
        CHECK_THAT(state_derivative(m, x, {0.0, 0.0})(iL3), WithinRel(20.0 / 0.150, 1e-12));
        CHECK_THAT(state_derivative(m, x, {0.0, 0.0})(iL3), WithinAbs(133.3, 0.05));
    }
}

TEST_CASE("conduction sets partition the diodes", "[converter-model]") {
    const DiodeSet on = conduction_set(SwitchPhase::On);
    const DiodeSet off = conduction_set(SwitchPhase::Off);
    std::set<std::string> on_names, off_names;
    for (int k = 0; k < kDiodes; ++k) {
        CHECK(on[k] != off[k]);
        if (on[k]) on_names.insert(std::string(kDiodeNames[k]));
        if (off[k]) off_names.insert(std::string(kDiodeNames[k]));
    }
    CHECK(on_names == std::set<std::string>{"D1", "D3", "D5", "Do"});
    CHECK(off_names == std::set<std::string>{"D2", "D4", "D6", "D7"});
    CHECK(on.count() + off.count() == kDiodes);
}

TEST_CASE("phase durations sum to the period", "[converter-model]") {
    ConverterParams p;
    p.D = 0.37;
    CHECK_THAT(phase_duration(p, SwitchPhase::On) + phase_duration(p, SwitchPhase::Off), WithinRel(p.Ts(), 1e-15));
    CHECK_THAT(phase_duration(p, SwitchPhase::On), WithinRel(0.37 / 50e3, 1e-15));
}

TEST_CASE("model rebuild is bit-identical", "[converter-model]") {
    ConverterParams p;
    p.parasitics.RL_copper = 2.0;
    for (auto v : {ModelVariant::PaperLiteral, ModelVariant::Reconciled})
        for (auto ph : {SwitchPhase::On, SwitchPhase::Off}) {
            const auto a = build_phase_model(p, ph, v);
            const auto b = build_phase_model(p, ph, v);
            CHECK(a.A == b.A);
            CHECK(a.B == b.B);
            CHECK(a.f == b.f);
        }
}

TEST_CASE("variants differ exactly at the listed fixes", "[converter-model]") {
    const ConverterParams p;
    std::set<std::tuple<int, int, int>> listed;
    for (const auto& e : discrepancy_report(p)) {
        if (e.kind != DiscrepancyKind::VariantFix) continue;
        listed.insert({static_cast<int>(e.cell.matrix), e.cell.row, e.cell.col});
    }
    std::set<std::tuple<int, int, int>> found;
    for (auto ph : {SwitchPhase::On, SwitchPhase::Off}) {
        const auto lit = build_phase_model(p, ph, ModelVariant::PaperLiteral);
        const auto rec = build_phase_model(p, ph, ModelVariant::Reconciled);
        CHECK(lit.B == rec.B);
        CHECK(lit.f == rec.f);
        const int id = static_cast<int>(ph == SwitchPhase::On ? MatrixId::A_on : MatrixId::A_off);
        for (int r = 0; r < kStates; ++r)
            for (int c = 0; c < kStates; ++c)
                if (lit.A(r, c) != rec.A(r, c)) found.insert({id, r, c});
    }
    CHECK(found == listed);
    CHECK(listed.size() == variant_fixes().size());
}

TEST_CASE("discrepancy report", "[converter-model]") {
    const ConverterParams p;
    const auto rep = discrepancy_report(p);
    REQUIRE_FALSE(rep.empty());

    SECTION("names the output capacitor sign") {
        bool found = false;
        for (const auto& e : rep)
            if (e.kind == DiscrepancyKind::VariantFix && e.cell == MatrixCell{MatrixId::A_off, vCo, vCo}) found = true;
        CHECK(found);
    }
    SECTION("deterministic") {
        const auto again = discrepancy_report(p);
        REQUIRE(again.size() == rep.size());
        for (std::size_t i = 0; i < rep.size(); ++i) {
            CHECK(again[i].location == rep[i].location);
            CHECK(again[i].cell == rep[i].cell);
        }
    }
    SECTION("self comparison of the literal variant is empty") {
        for (auto ph : {SwitchPhase::On, SwitchPhase::Off}) {
            const auto a = build_phase_model(p, ph, ModelVariant::PaperLiteral);
            const auto b = build_phase_model(p, ph, ModelVariant::PaperLiteral);
            CHECK((a.A - b.A).isZero(0.0));
        }
    }
    SECTION("printed average cells really differ from the literal assembly") {
        const StateMatrix pa = printed_average_A(p);
        const StateMatrix la = literal_average_A(p);
        const InputMatrix pb = printed_average_B(p);
        const InputMatrix lb = literal_average_B(p);
        for (const auto& e : rep) {
            if (e.kind != DiscrepancyKind::PrintedAverage) continue;
            if (e.cell.matrix == MatrixId::A_av) CHECK(pa(e.cell.row, e.cell.col) != la(e.cell.row, e.cell.col));
            else CHECK(pb(e.cell.row, e.cell.col) != lb(e.cell.row, e.cell.col));
        }
    }
    SECTION("battery column recorded") {
        bool found = false;
        for (const auto& e : rep)
            if (e.cell == MatrixCell{MatrixId::B_av, iL4, 0}) found = true;
        CHECK(found);
    }
}

TEST_CASE("reconciled off-phase is passive", "[converter-model][property]") {
    const ConverterParams p;
    const auto m = build_phase_model(p, SwitchPhase::Off, ModelVariant::Reconciled);
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 100; ++i) {
        const StateVector x = random_state(rng);
        const double rate = energy_rate(p, m, x, {0.0, 0.0});
        const double scale = stored_energy(p, x) * 1e4;
        CHECK(rate <= 1e-12 * scale);
    }
}

TEST_CASE("literal off-phase violates passivity somewhere", "[converter-model][property]") {
    const ConverterParams p;
    const auto m = build_phase_model(p, SwitchPhase::Off, ModelVariant::PaperLiteral);
    StateVector x = StateVector::Zero();
    x(vCo) = 10.0;
    CHECK(energy_rate(p, m, x, {0.0, 0.0}) > 0.0);
}

TEST_CASE("parameter checks name the field", "[converter-model]") {
    ConverterParams p;
    p.D = 1.2;
    p.L3 = -1.0;
    p.parasitics.esr_cap = -0.1;
    const auto issues = check_params(p);
    std::set<std::string> paths;
    for (const auto& i : issues) paths.insert(i.path);
    CHECK(paths == std::set<std::string>{"params.D", "params.L3", "params.parasitics.esr_cap"});
    CHECK_THROWS_AS(require_valid(p), DomainError);
}
