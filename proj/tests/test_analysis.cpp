#include <doctest.h>

#include <cmath>
#include <fstream>

#include "test_util.hpp"
#include "xrfpid/analysis.hpp"
#include "xrfpid/errors.hpp"
#include "xrfpid/image_io.hpp"
#include "xrfpid/kernels.hpp"
#include "xrfpid/rng.hpp"
#include "xrfpid/simulate.hpp"

using namespace xrfpid;

namespace {

const PhysicsTable& table() {
    static const PhysicsTable t =
        load_physics_table(test::physics_path(), default_pigment_library());
    return t;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("hand-computed confusion example") {
    ClassMetrics m = compute_metrics({3, 5, 1, 1});
    CHECK(m.accuracy == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(m.sensitivity == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(m.precision == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(m.f1 == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("all-true-positive counts give perfect scores") {
    ClassMetrics m = compute_metrics({42, 0, 0, 0});
    CHECK(m.accuracy == 1.0);
    CHECK(m.sensitivity == 1.0);
    CHECK(m.precision == 1.0);
    CHECK(m.f1 == 1.0);
}

TEST_CASE("zero-denominator conventions") {
    ClassMetrics m = compute_metrics({0, 5, 0, 3});
    CHECK(m.sensitivity == 0.0);
    CHECK(m.precision == 0.0);
    CHECK(m.f1 == 0.0);
}

TEST_CASE("randomized counts match exact rational evaluation") {
    Rng rng(2023);
    for (int trial = 0; trial < 20; ++trial) {
        ConfusionCounts c;
        c.tp = static_cast<std::int64_t>(rng.uniform_index(50));
        c.tn = static_cast<std::int64_t>(rng.uniform_index(50));
        c.fp = static_cast<std::int64_t>(rng.uniform_index(50));
        c.fn = static_cast<std::int64_t>(rng.uniform_index(50));
        if (c.total() == 0) c.tn = 1;
        ClassMetrics m = compute_metrics(c);
        CHECK(m.accuracy == static_cast<double>(c.tp + c.tn) /
                                static_cast<double>(c.total()));
        if (c.tp + c.fn > 0)
            CHECK(m.sensitivity ==
                  static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn));
        if (c.tp + c.fp > 0)
            CHECK(m.precision ==
                  static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp));
        // harmonic-mean identity via cross multiplication
        if (m.precision + m.sensitivity > 0.0)
            CHECK(m.f1 * (m.precision + m.sensitivity) ==
                  doctest::Approx(2.0 * m.precision * m.sensitivity)
                      .epsilon(1e-15));
        CHECK(m.f1 <= std::max(m.precision, m.sensitivity) + 1e-15);
    }
}

TEST_CASE("threshold: exactly 0.5 counts as positive") {
    float probs[kClassCount] = {0.5f, 0.4999f, 0.0f, 1.0f, 0.5f, 0, 0, 0, 0, 0, 0};
    LabelVector v = threshold_prediction(probs, 0.5);
    CHECK(v.bits[0]);
    CHECK_FALSE(v.bits[1]);
    CHECK(v.bits[3]);
    CHECK(v.bits[4]);
}

TEST_CASE("confusion accumulation: all-zero predictions against all-true") {
    const int n = 13, classes = 4;
    std::vector<float> probs(n * classes, 0.0f);
    std::vector<std::uint8_t> truth(n * classes, 1);
    std::vector<ConfusionCounts> counts;
    accumulate_confusion(probs.data(), truth.data(), n, classes, 0.5, counts);
    for (const auto& c : counts) {
        CHECK(c.fn == n);
        CHECK(c.tp + c.tn + c.fp == 0);
    }
}

TEST_CASE("confusion counts always sum to the sample count") {
    Rng rng(5);
    const int n = 100, classes = 3;
    std::vector<float> probs(n * classes);
    std::vector<std::uint8_t> truth(n * classes);
    for (auto& p : probs) p = static_cast<float>(rng.uniform());
    for (auto& t : truth) t = rng.uniform() < 0.5;
    std::vector<ConfusionCounts> counts;
    accumulate_confusion(probs.data(), truth.data(), n, classes, 0.5, counts);
    for (const auto& c : counts) CHECK(c.total() == n);
}

}  // TEST_SUITE

TEST_SUITE("analysis") {

TEST_CASE("classify_cube: identical spectra give constant maps") {
    ArchSpec arch = ArchSpec::reduced(64);
    arch.num_classes = kClassCount;
    Network<float> net(arch);
    net.init_weights(3);

    EnergyCalibration cal{0.0, 0.05, 128};  // crops to 64 channels
    SpectralCube cube = make_cube(3, 2, cal);
    Rng rng(6);
    std::vector<float> one(128);
    for (auto& v : one) v = static_cast<float>(rng.uniform(0, 100));
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 3; ++x)
            std::copy(one.begin(), one.end(), cube.pixel(x, y));

    PreprocessConfig config;
    config.crop_energy_kev = 3.15;
    config.expected_length = 64;
    PigmentMaps maps = classify_cube(net, cube, config);
    CHECK(maps.width == 3);
    CHECK(maps.height == 2);
    for (int cls = 0; cls < maps.classes; ++cls)
        for (int p = 1; p < 6; ++p)
            CHECK(maps.map(cls)[p] == maps.map(cls)[0]);
}

TEST_CASE("classify_cube: empty cubes give empty maps") {
    ArchSpec arch = ArchSpec::reduced(64);
    arch.num_classes = kClassCount;
    Network<float> net(arch);
    SpectralCube cube = make_cube(0, 0, {0.0, 0.05, 128});
    PreprocessConfig config;
    config.crop_energy_kev = 3.15;
    config.expected_length = 64;
    PigmentMaps maps = classify_cube(net, cube, config);
    CHECK(maps.values.empty());
}

TEST_CASE("classify_cube: wrong class count is a shape error") {
    Network<float> net(ArchSpec::reduced(64));  // 3 classes
    SpectralCube cube = make_cube(1, 1, {0.0, 0.05, 128});
    CHECK_THROWS_AS(classify_cube(net, cube), ShapeError);
}

TEST_CASE("classify_cube: incompatible calibration fails before inference") {
    ArchSpec arch = ArchSpec::reduced(64);
    arch.num_classes = kClassCount;
    Network<float> net(arch);
    SpectralCube cube = make_cube(2, 2, {0.0, 0.05, 32});  // too short
    CHECK_THROWS_AS(classify_cube(net, cube), DimensionError);
}

TEST_CASE("classify_cube is identical serial and parallel") {
    ArchSpec arch = ArchSpec::reduced(64);
    arch.num_classes = kClassCount;
    Network<float> net(arch);
    net.init_weights(8);
    SpectralCube cube = make_cube(5, 4, {0.0, 0.05, 128});
    Rng rng(9);
    for (auto& v : cube.counts) v = static_cast<float>(rng.uniform(0, 50));
    PreprocessConfig config;
    config.crop_energy_kev = 3.15;
    config.expected_length = 64;

    kernels::set_jobs(1);
    PigmentMaps serial = classify_cube(net, cube, config);
    kernels::set_jobs(2);
    PigmentMaps parallel = classify_cube(net, cube, config);
    kernels::set_jobs(0);
    CHECK(serial.values == parallel.values);
}

TEST_CASE("element map: zero cube maps to zero") {
    SpectralCube cube = make_cube(2, 2, default_calibration());
    ElementMap map = element_map(cube, table(), element_from_symbol("Fe"),
                                 LineSeries::Ka);
    for (float v : map.values) CHECK(v == 0.0f);
    CHECK_FALSE(map.window_truncated);
    CHECK(map.label == "Fe-Ka");
}

TEST_CASE("element map recovers an injected peak area") {
    SpectralCube cube = make_cube(1, 1, default_calibration());
    DetectorModel det;
    EmissionLine line = *table().find_line(element_from_symbol("Cu"),
                                           LineSeries::Ka);
    Spectrum s = render_spectrum({{line, 2500.0}}, det, Spectrum{}, false, 0);
    float* px = cube.pixel(0, 0);
    for (int ch = 0; ch < 4096; ++ch)
        px[ch] = static_cast<float>(s.counts[ch]);
    ElementMap map = element_map(cube, table(), element_from_symbol("Cu"),
                                 LineSeries::Ka, 0.2);
    CHECK(map.at(0, 0) == doctest::Approx(2500.0).epsilon(0.02));
}

TEST_CASE("element map: unknown lines list the available ones") {
    SpectralCube cube = make_cube(1, 1, default_calibration());
    CHECK_THROWS_WITH_AS(element_map(cube, table(), element_from_symbol("Fe"),
                                     LineSeries::La),
                         doctest::Contains("available"), RangeError);
}

TEST_CASE("element map flags truncated windows") {
    // Sn Ka at 25.271 keV against a cube topping out at 25.35 keV
    SpectralCube cube = make_cube(1, 1, {0.0, 0.05, 508});
    ElementMap map = element_map(cube, table(), element_from_symbol("Sn"),
                                 LineSeries::Ka, 0.3);
    CHECK(map.window_truncated);
}

TEST_CASE("overlay: identical rasters agree channel for channel") {
    ElementMap e;
    e.width = 2;
    e.height = 2;
    e.values = {0.0f, 0.5f, 1.0f, 2.0f};
    std::vector<float> pigment = {0.0f, 0.25f, 0.5f, 1.0f};
    OverlayImage img = overlay(pigment, 2, 2, {&e}, 100.0);
    // with 100th-percentile clipping the element channel scales by its max
    for (int i = 0; i < 4; ++i) {
        CHECK(img.r[i] == pigment[i]);
        CHECK(img.g[i] == doctest::Approx(e.values[i] / 2.0f));
        CHECK(img.b[i] == 0.0f);
    }
}

TEST_CASE("overlay: the clip percentile value maps exactly to one") {
    ElementMap e;
    e.width = 10;
    e.height = 10;
    e.values.resize(100);
    for (int i = 0; i < 100; ++i) e.values[i] = static_cast<float>(i + 1);
    std::vector<float> pigment(100, 0.5f);
    OverlayImage img = overlay(pigment, 10, 10, {&e}, 99.0);
    const double clip = percentile_value(e.values, 99.0);
    CHECK(clip == 99.0f);
    for (int i = 0; i < 100; ++i) {
        if (e.values[i] == clip) CHECK(img.g[i] == 1.0f);
        if (e.values[i] > clip) CHECK(img.g[i] == 1.0f);  // clipped
        if (e.values[i] < clip)
            CHECK(img.g[i] == doctest::Approx(e.values[i] / clip));
    }
}

TEST_CASE("overlay: an all-zero element map stays dark") {
    ElementMap e;
    e.width = 2;
    e.height = 1;
    e.values = {0.0f, 0.0f};
    OverlayImage img = overlay({0.3f, 0.7f}, 2, 1, {&e}, 99.0);
    CHECK(img.g[0] == 0.0f);
    CHECK(img.g[1] == 0.0f);
}

TEST_CASE("overlay rejects mismatched dimensions") {
    ElementMap e;
    e.width = 3;
    e.height = 1;
    e.values = {1.0f, 2.0f, 3.0f};
    CHECK_THROWS_AS(overlay({0.1f, 0.2f}, 2, 1, {&e}, 99.0), DimensionError);
}

TEST_CASE("scatter export: one row per pixel, min reduction") {
    ElementMap a, b;
    a.width = b.width = 2;
    a.height = b.height = 2;
    a.values = {1.0f, 2.0f, 3.0f, 4.0f};
    b.values = {4.0f, 0.0f, 2.0f, 1.0f};
    std::vector<float> pigment = {0.9f, 0.8f, 0.7f, 0.6f};
    auto rows = scatter_data(pigment, 2, 2, {&a, &b}, ScatterReduction::Min);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].concentration == 1.0);
    CHECK(rows[1].concentration == 0.0);
    CHECK(rows[2].concentration == 2.0);
    CHECK(rows[3].concentration == 1.0);
    CHECK(rows[0].probability == doctest::Approx(0.9));

    ElementMap zero;
    zero.width = 2;
    zero.height = 2;
    zero.values = {0, 0, 0, 0};
    auto zero_rows =
        scatter_data(pigment, 2, 2, {&a, &zero}, ScatterReduction::Min);
    for (const auto& row : zero_rows) CHECK(row.concentration == 0.0);
}

TEST_CASE("image writers produce valid headers") {
    test::TempDir tmp("images");
    std::vector<float> raster = {0.0f, 0.5f, 1.0f, 0.25f};
    write_pgm16(raster, 2, 2, tmp.file("m.pgm"));
    std::ifstream pgm(tmp.file("m.pgm"), std::ios::binary);
    std::string header(2, '\0');
    pgm.read(header.data(), 2);
    CHECK(header == "P5");

    OverlayImage img;
    img.width = 2;
    img.height = 2;
    img.r = raster;
    img.g = raster;
    img.b = raster;
    write_png_rgb(img, tmp.file("o.png"));
    std::ifstream png(tmp.file("o.png"), std::ios::binary);
    unsigned char sig[8];
    png.read(reinterpret_cast<char*>(sig), 8);
    CHECK(sig[0] == 0x89);
    CHECK(sig[1] == 'P');
    CHECK(sig[2] == 'N');
    CHECK(sig[3] == 'G');
}

}  // TEST_SUITE
