#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "xrfpid/errors.hpp"
#include "xrfpid/physics.hpp"
#include "xrfpid/pigments.hpp"
#include "xrfpid/rng.hpp"

using namespace xrfpid;

namespace {

const PhysicsTable& bundled_table() {
    static const PhysicsTable table =
        load_physics_table(test::physics_path(), default_pigment_library());
    return table;
}

}  // namespace

TEST_SUITE("physics") {

TEST_CASE("bundled table loads and has the reference mercury line") {
    const PhysicsTable& t = bundled_table();
    const EmissionLine* la =
        t.find_line(element_from_symbol("Hg"), LineSeries::La);
    REQUIRE(la != nullptr);
    CHECK(la->energy_kev == doctest::Approx(9.989).epsilon(1e-9));
}

TEST_CASE("relative intensities sum to one per shell group") {
    const PhysicsTable& t = bundled_table();
    std::map<std::pair<ElementId, Shell>, double> sums;
    for (const auto& ln : t.lines) {
        Shell sh;
        if (series_excitation_shell(ln.series, &sh))
            sums[{ln.element, sh}] += ln.relative_intensity;
    }
    REQUIRE(!sums.empty());
    for (const auto& [key, sum] : sums)
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("table missing an element required by the library is rejected") {
    test::TempDir tmp("physics_missing_sn");
    std::ifstream in(test::physics_path());
    std::ofstream out(tmp.file("nosn.dat"));
    std::string line;
    bool in_sn_attenuation = false;
    while (std::getline(in, line)) {
        if (line.rfind("[attenuation", 0) == 0)
            in_sn_attenuation = line.rfind("[attenuation Sn]", 0) == 0;
        if (in_sn_attenuation) continue;
        if (line.rfind("Sn ", 0) == 0) continue;  // lines + fp records
        out << line << "\n";
    }
    out.close();
    CHECK_THROWS_WITH_AS(
        load_physics_table(tmp.file("nosn.dat"), default_pigment_library()),
        "incomplete physics: Sn (carmine)", IncompletePhysicsError);
}

TEST_CASE("empty file fails at line 1") {
    test::TempDir tmp("physics_empty");
    { std::ofstream out(tmp.file("empty.dat")); }
    try {
        load_physics_table(tmp.file("empty.dat"));
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line_number == 1);
    }
}

TEST_CASE("malformed record reports its line number") {
    test::TempDir tmp("physics_bad");
    {
        std::ofstream out(tmp.file("bad.dat"));
        out << "[lines]\n";
        out << "Hg La 9.989 1.0\n";
        out << "Hg Lb not_a_number 0.9\n";
    }
    try {
        load_physics_table(tmp.file("bad.dat"));
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line_number == 3);
    }
}

TEST_CASE("interpolation is exact at tabulated samples") {
    const PhysicsTable& t = bundled_table();
    const AbsorptionCurve& fe = t.curve(element_from_symbol("Fe"));
    for (std::size_t i = 0; i < fe.samples.size(); i += 7)
        CHECK(mu_rho(t, fe.element, fe.samples[i].first) ==
              doctest::Approx(fe.samples[i].second).epsilon(1e-12));
}

TEST_CASE("mercury absorbs above its L3 edge more than below it") {
    const PhysicsTable& t = bundled_table();
    const ElementId hg = element_from_symbol("Hg");
    // lead La sits below the Hg L3 edge, lead Lb above it
    const double at_pb_la = mu_rho(t, hg, 10.552);
    const double at_pb_lb = mu_rho(t, hg, 12.614);
    CHECK(at_pb_lb > at_pb_la);
    CHECK(at_pb_lb / at_pb_la > 1.3);
}

TEST_CASE("energies outside the tabulated range are rejected") {
    const PhysicsTable& t = bundled_table();
    const ElementId fe = element_from_symbol("Fe");
    CHECK_THROWS_AS(mu_rho(t, fe, 0.1), RangeError);
    CHECK_THROWS_AS(mu_rho(t, fe, 100.0), RangeError);
}

TEST_CASE("curves decrease between edges") {
    const PhysicsTable& t = bundled_table();
    for (const auto& [el, curve] : t.curves) {
        for (std::size_t i = 1; i < curve.samples.size(); ++i) {
            const auto& prev = curve.samples[i - 1];
            const auto& next = curve.samples[i];
            bool crosses_edge = false;
            for (const auto& e : curve.edges)
                if (prev.first < e.energy_kev && e.energy_kev <= next.first)
                    crosses_edge = true;
            if (!crosses_edge)
                CHECK(next.second < prev.second);
        }
    }
}

TEST_CASE("mixture rule: single element and even blend") {
    const PhysicsTable& t = bundled_table();
    const ElementId fe = element_from_symbol("Fe");
    const ElementId ca = element_from_symbol("Ca");
    CHECK(mixture_mu_rho(t, {{fe, 1.0}}, 8.0) ==
          doctest::Approx(mu_rho(t, fe, 8.0)).epsilon(1e-12));
    const double blend = mixture_mu_rho(t, {{fe, 0.5}, {ca, 0.5}}, 8.0);
    CHECK(blend == doctest::Approx(0.5 * mu_rho(t, fe, 8.0) +
                                   0.5 * mu_rho(t, ca, 8.0))
                       .epsilon(1e-12));
}

TEST_CASE("mixture rule matches a direct weighted sum for lead white") {
    const PhysicsTable& t = bundled_table();
    const auto& lw = default_pigment_library().by_id(7);
    double expected = 0.0;
    for (const auto& [el, w] : lw.composition)
        expected += w * mu_rho(t, el, 8.0);
    CHECK(mixture_mu_rho(t, lw.composition, 8.0) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("mixture rule rejects bad fraction sums") {
    const PhysicsTable& t = bundled_table();
    const ElementId fe = element_from_symbol("Fe");
    CHECK_THROWS_AS(mixture_mu_rho(t, {{fe, 0.7}}, 8.0), ValidationError);
    CHECK_THROWS_AS(mixture_mu_rho(t, {{fe, -0.2}}, 8.0), ValidationError);
}

TEST_CASE("mixture attenuation is linear in mass fractions") {
    const PhysicsTable& t = bundled_table();
    const ElementId a = element_from_symbol("Pb");
    const ElementId b = element_from_symbol("Zn");
    const ElementId c = element_from_symbol("O");
    Rng rng(20240817);
    for (int trial = 0; trial < 50; ++trial) {
        double wa = rng.uniform();
        double wb = rng.uniform() * (1.0 - wa);
        double wc = 1.0 - wa - wb;
        const double e = rng.uniform(2.5, 40.0);
        const double mixed = mixture_mu_rho(t, {{a, wa}, {b, wb}, {c, wc}}, e);
        const double expected = wa * mu_rho(t, a, e) + wb * mu_rho(t, b, e) +
                                wc * mu_rho(t, c, e);
        CHECK(mixed == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("shell photo fractions partition the photoabsorption") {
    const PhysicsTable& t = bundled_table();
    const ElementId pb = element_from_symbol("Pb");
    // above all L edges the L-shell shares are fixed by the jump ratios
    const double f3 = shell_photo_fraction(t, pb, Shell::L3, 20.0);
    const double f2 = shell_photo_fraction(t, pb, Shell::L2, 20.0);
    const double f1 = shell_photo_fraction(t, pb, Shell::L1, 20.0);
    CHECK(f3 > f2);
    CHECK(f2 > f1);
    CHECK(f1 > 0.0);
    CHECK(f1 + f2 + f3 < 1.0);
    // below the L3 edge the L3 shell cannot be ionized
    CHECK(shell_photo_fraction(t, pb, Shell::L3, 12.0) == 0.0);
}

}  // TEST_SUITE
