#include <doctest.h>

#include <fstream>

#include "test_util.hpp"
#include "xrfpid/errors.hpp"
#include "xrfpid/pigments.hpp"
#include "xrfpid/rng.hpp"
#include "xrfpid/spectrum_io.hpp"

using namespace xrfpid;

TEST_SUITE("spectrum") {

TEST_CASE("xsp round trip is bit exact") {
    test::TempDir tmp("xsp_roundtrip");
    Spectrum s;
    s.calibration = default_calibration();
    s.live_time_s = 10.0;
    Rng rng(7);
    s.counts.resize(4096);
    for (auto& c : s.counts) c = rng.uniform(0.0, 5e4);
    write_spectrum(s, tmp.file("a.xsp"));
    Spectrum back = read_spectrum(tmp.file("a.xsp"));
    CHECK(back.calibration == s.calibration);
    CHECK(back.live_time_s == s.live_time_s);
    REQUIRE(back.counts.size() == s.counts.size());
    for (std::size_t i = 0; i < s.counts.size(); ++i)
        CHECK(back.counts[i] == s.counts[i]);
}

TEST_CASE("xsp with a count-row shortfall is a parse error") {
    test::TempDir tmp("xsp_short");
    {
        std::ofstream out(tmp.file("short.xsp"));
        out << "xsp 1\noffset 0\ngain 0.01\nchannels 8\ndata\n";
        for (int i = 0; i < 7; ++i) out << "1\n";
    }
    CHECK_THROWS_AS(read_spectrum(tmp.file("short.xsp")), ParseError);
}

TEST_CASE("legacy headerless file suggests conversion") {
    test::TempDir tmp("xsp_legacy");
    {
        std::ofstream out(tmp.file("legacy.xsp"));
        for (int i = 0; i < 16; ++i) out << "12\n";
    }
    CHECK_THROWS_WITH_AS(
        read_spectrum(tmp.file("legacy.xsp")),
        doctest::Contains("headerless"), ParseError);
}

TEST_CASE("negative and NaN counts are rejected") {
    Spectrum s;
    s.calibration = {0.0, 0.01, 4};
    s.counts = {1.0, -2.0, 3.0, 4.0};
    CHECK_THROWS_AS(validate_spectrum(s), ValidationError);
    s.counts = {1.0, std::nan(""), 3.0, 4.0};
    CHECK_THROWS_AS(validate_spectrum(s), ValidationError);
}

TEST_CASE("cube round trip is bit exact") {
    test::TempDir tmp("cube_roundtrip");
    SpectralCube cube = make_cube(2, 2, default_calibration());
    Rng rng(11);
    for (auto& c : cube.counts) c = static_cast<float>(rng.uniform(0, 1000));
    write_cube(cube, tmp.file("c.xcube"));
    SpectralCube back = read_cube(tmp.file("c.xcube"));
    CHECK(back.width == cube.width);
    CHECK(back.height == cube.height);
    CHECK(back.calibration == cube.calibration);
    REQUIRE(back.counts.size() == cube.counts.size());
    for (std::size_t i = 0; i < cube.counts.size(); ++i)
        CHECK(back.counts[i] == cube.counts[i]);
}

TEST_CASE("truncated cube reports expected versus actual bytes") {
    test::TempDir tmp("cube_truncated");
    SpectralCube cube = make_cube(2, 2, {0.0, 0.01, 64});
    write_cube(cube, tmp.file("c.xcube"));
    // drop the last 4 bytes
    std::ifstream in(tmp.file("c.xcube"), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(tmp.file("t.xcube"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 4));
    out.close();
    CHECK_THROWS_WITH_AS(read_cube(tmp.file("t.xcube")),
                         doctest::Contains("truncated"), IoError);
}

TEST_CASE("unknown cube version is rejected") {
    test::TempDir tmp("cube_version");
    SpectralCube cube = make_cube(1, 1, {0.0, 0.01, 4});
    write_cube(cube, tmp.file("c.xcube"));
    std::fstream f(tmp.file("c.xcube"),
                   std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(4);
    const std::uint32_t bad = 99;
    f.write(reinterpret_cast<const char*>(&bad), 4);
    f.close();
    CHECK_THROWS_WITH_AS(read_cube(tmp.file("c.xcube")),
                         doctest::Contains("version"), IoError);
}

}  // TEST_SUITE

TEST_SUITE("pigments") {

TEST_CASE("default library has 12 pigments and 11 classes") {
    const PigmentLibrary& lib = default_pigment_library();
    CHECK(lib.pigments.size() == 12);
    CHECK(lib.classes().size() == 11);
    CHECK_FALSE(lib.by_id(1).is_class);  // the chalk ground is not a class
    CHECK(lib.surrogates.size() == 2);
}

TEST_CASE("library file on disk matches the built-in copy") {
    PigmentLibrary disk = load_pigment_library(
        (std::filesystem::path(test::data_dir()) / "pigments.dat").string());
    const PigmentLibrary& builtin = default_pigment_library();
    REQUIRE(disk.pigments.size() == builtin.pigments.size());
    for (std::size_t i = 0; i < disk.pigments.size(); ++i) {
        CHECK(disk.pigments[i].id == builtin.pigments[i].id);
        CHECK(disk.pigments[i].abbreviation == builtin.pigments[i].abbreviation);
        CHECK(disk.pigments[i].density_g_cm3 ==
              builtin.pigments[i].density_g_cm3);
        CHECK(disk.pigments[i].composition == builtin.pigments[i].composition);
    }
}

TEST_CASE("vermilion stoichiometry") {
    // HgS with standard atomic weights: w(Hg) = 200.592 / 232.652
    const auto& vm = default_pigment_library().by_id(11);
    const ElementId hg = element_from_symbol("Hg");
    const ElementId s = element_from_symbol("S");
    CHECK(vm.composition.at(hg) == doctest::Approx(0.8621976).epsilon(1e-6));
    CHECK(vm.composition.at(s) == doctest::Approx(0.1378024).epsilon(1e-6));
}

TEST_CASE("compositions sum to one") {
    const PigmentLibrary& lib = default_pigment_library();
    for (const auto& p : lib.pigments) {
        double sum = 0.0;
        for (const auto& [el, w] : p.composition) sum += w;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("mixture density follows the reciprocal rule") {
    const PigmentLibrary& lib = default_pigment_library();
    PaintLayer pure = single_pigment_layer(11, 100.0);
    CHECK(pure.density(lib) == doctest::Approx(8.18).epsilon(1e-12));
    PaintLayer blend = make_layer({{11, 0.5}, {12, 0.5}}, 100.0);
    const double expected = 1.0 / (0.5 / 8.18 + 0.5 / 5.61);
    CHECK(blend.density(lib) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("labels: any positive fraction marks the class") {
    const PigmentLibrary& lib = default_pigment_library();
    LayerStack stack = make_stack(single_pigment_layer(11, 100.0),
                                  make_layer({{7, 0.994}, {11, 0.006}}, 120.0),
                                  175.0);
    LabelVector v = labels_for(stack, lib);
    CHECK(v.bits[lib.class_index_of(11)]);
    CHECK(v.bits[lib.class_index_of(7)]);
    CHECK(v.count() == 2);
}

TEST_CASE("labels: chalk layers carry no class") {
    const PigmentLibrary& lib = default_pigment_library();
    LayerStack stack =
        make_stack(single_pigment_layer(1, 100.0), std::nullopt, 175.0);
    CHECK(labels_for(stack, lib).count() == 0);
}

TEST_CASE("labels: the surrogate pair marks emerald green only together") {
    const PigmentLibrary& lib = default_pigment_library();
    const int eg = lib.class_index_of(5);
    LayerStack both = make_stack(
        make_layer({{kVerdigrisId, 0.4}, {kSodiumArseniteId, 0.6}}, 80.0),
        std::nullopt, 175.0);
    CHECK(labels_for(both, lib).bits[eg]);
    LayerStack only_vg = make_stack(
        make_layer({{kVerdigrisId, 0.4}, {12, 0.6}}, 80.0), std::nullopt, 175.0);
    CHECK_FALSE(labels_for(only_vg, lib).bits[eg]);
}

TEST_CASE("labels are independent of layer order") {
    const PigmentLibrary& lib = default_pigment_library();
    PaintLayer a = single_pigment_layer(4, 60.0);
    PaintLayer b = single_pigment_layer(10, 110.0);
    CHECK(labels_for(make_stack(a, b, 175.0), lib) ==
          labels_for(make_stack(b, a, 175.0), lib));
}

TEST_CASE("label strings round trip") {
    LabelVector v;
    v.bits[0] = v.bits[4] = v.bits[10] = true;
    CHECK(v.to_string() == "10001000001");
    CHECK(LabelVector::from_string(v.to_string()) == v);
    CHECK_THROWS_AS(LabelVector::from_string("101"), ValidationError);
}

}  // TEST_SUITE
