#include "xrfpid/pigments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "xrfpid/errors.hpp"

namespace xrfpid {

namespace {

constexpr double kFractionTolerance = 1e-6;

// Mirror of data/pigments.dat; a unit test keeps the two in sync.
constexpr const char* kDefaultLibraryText = R"(
pigment 1  CC  2.71 0 CaCO3                    calcium_carbonate
pigment 2  CrG 5.22 1 Cr2O3                    chrome_oxide_green
pigment 3  CrY 6.12 1 PbCrO4                   chrome_yellow
pigment 4  CB  4.37 1 CoO.Al2O3                cobalt_blue
pigment 5  EG  3.27 1 Cu(CH3COO)2.3Cu(AsO2)2   emerald_green
pigment 6  IO  5.25 1 Fe2O3                    iron_oxide
pigment 7  LW  6.14 1 2PbCO3.Pb(OH)2           lead_white
pigment 8  PB  1.83 1 Fe[Fe2(CN)6]3            prussian_blue
pigment 9  RL  8.92 1 Pb3O4                    red_lead
pigment 10 CM  6.95 1 SnO2                     carmine
pigment 11 VM  8.18 1 HgS                      vermilion
pigment 12 ZW  5.61 1 ZnO                      zinc_white
surrogate 13 VG 1.90 0 Cu(CH3COO)2.2Cu(OH)2    verdigris
surrogate 14 SA 1.87 0 NaAsO2                  sodium_arsenite
)";

PigmentLibrary parse_library(std::istream& in, const std::string& file) {
    PigmentLibrary lib;
    std::string raw;
    long line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        auto hash = raw.find('#');
        std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
        std::istringstream iss(line);
        std::string kind;
        if (!(iss >> kind)) continue;
        if (kind != "pigment" && kind != "surrogate")
            throw ParseError("expected 'pigment' or 'surrogate', got \"" + kind +
                             "\"", file, line_no);
        Pigment p;
        std::string formula;
        int class_flag = 0;
        if (!(iss >> p.id >> p.abbreviation >> p.density_g_cm3 >> class_flag >>
              formula >> p.name))
            throw ParseError("malformed pigment record", file, line_no);
        p.is_class = class_flag != 0;
        p.composition = formula_mass_fractions(formula);
        if (p.density_g_cm3 <= 0.0)
            throw ParseError("non-positive density", file, line_no);
        (kind == "pigment" ? lib.pigments : lib.surrogates).push_back(p);
    }
    if (lib.pigments.size() != 12)
        throw ValidationError("pigment library must hold 12 pigments, got " +
                              std::to_string(lib.pigments.size()));
    int classes = 0;
    for (const auto& p : lib.pigments) classes += p.is_class ? 1 : 0;
    if (classes != kClassCount)
        throw ValidationError("pigment library must mark 11 classes, got " +
                              std::to_string(classes));
    for (size_t i = 0; i < lib.pigments.size(); ++i)
        if (lib.pigments[i].id != static_cast<int>(i) + 1)
            throw ValidationError("pigment ids must run 1..12 in order");
    return lib;
}

void check_fraction_sum(const std::map<int, double>& mixture) {
    double sum = 0.0;
    for (const auto& [id, w] : mixture) {
        if (w < 0.0)
            throw ValidationError("negative mixture fraction for pigment id " +
                                  std::to_string(id));
        sum += w;
    }
    if (std::abs(sum - 1.0) > kFractionTolerance)
        throw ValidationError("mixture fractions sum to " + std::to_string(sum) +
                              ", expected 1");
}

}  // namespace

const Pigment& PigmentLibrary::by_id(int id) const {
    for (const auto& p : pigments)
        if (p.id == id) return p;
    for (const auto& p : surrogates)
        if (p.id == id) return p;
    throw ValidationError("unknown pigment id " + std::to_string(id));
}

const Pigment* PigmentLibrary::find_abbrev(const std::string& abbrev) const {
    for (const auto& p : pigments)
        if (p.abbreviation == abbrev) return &p;
    for (const auto& p : surrogates)
        if (p.abbreviation == abbrev) return &p;
    return nullptr;
}

std::vector<const Pigment*> PigmentLibrary::classes() const {
    std::vector<const Pigment*> out;
    for (const auto& p : pigments)
        if (p.is_class) out.push_back(&p);
    return out;
}

int PigmentLibrary::class_index_of(int pigment_id) const {
    int idx = 0;
    for (const auto& p : pigments) {
        if (!p.is_class) continue;
        if (p.id == pigment_id) return idx;
        ++idx;
    }
    return -1;
}

PigmentLibrary load_pigment_library(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open pigment library \"" + path + "\"");
    return parse_library(in, path);
}

const PigmentLibrary& default_pigment_library() {
    static const PigmentLibrary lib = [] {
        std::istringstream in(kDefaultLibraryText);
        return parse_library(in, "<builtin pigment library>");
    }();
    return lib;
}

PaintLayer make_layer(std::map<int, double> mixture, double thickness_um) {
    if (thickness_um <= 0.0)
        throw ValidationError("layer thickness must be positive");
    check_fraction_sum(mixture);
    PaintLayer layer;
    layer.mixture = std::move(mixture);
    layer.thickness_um = thickness_um;
    return layer;
}

PaintLayer single_pigment_layer(int pigment_id, double thickness_um) {
    return make_layer({{pigment_id, 1.0}}, thickness_um);
}

double PaintLayer::density(const PigmentLibrary& lib) const {
    double inv = 0.0;
    for (const auto& [id, w] : mixture)
        inv += w / lib.by_id(id).density_g_cm3;
    return 1.0 / inv;
}

std::map<ElementId, double> PaintLayer::element_fractions(
    const PigmentLibrary& lib) const {
    std::map<ElementId, double> out;
    for (const auto& [id, w] : mixture) {
        if (w <= 0.0) continue;
        for (const auto& [el, f] : lib.by_id(id).composition)
            out[el] += w * f;
    }
    return out;
}

LayerStack make_stack(std::optional<PaintLayer> top,
                      std::optional<PaintLayer> bottom,
                      double ground_thickness_um) {
    LayerStack stack;
    stack.top = std::move(top);
    stack.bottom = std::move(bottom);
    stack.ground = single_pigment_layer(1, ground_thickness_um);
    return stack;
}

std::string LayerStack::describe(const PigmentLibrary& lib) const {
    auto layer_str = [&](const std::optional<PaintLayer>& l) {
        if (!l) return std::string("none");
        std::ostringstream os;
        bool first = true;
        for (const auto& [id, w] : l->mixture) {
            if (w <= 0.0) continue;
            if (!first) os << "+";
            os << lib.by_id(id).abbreviation;
            if (w < 1.0) os << ":" << w;
            first = false;
        }
        os << "@" << l->thickness_um;
        return os.str();
    };
    return layer_str(top) + "/" + layer_str(bottom) + "/CC@" +
           std::to_string(ground.thickness_um);
}

int LabelVector::count() const {
    int n = 0;
    for (bool b : bits) n += b ? 1 : 0;
    return n;
}

std::string LabelVector::to_string() const {
    std::string s(kClassCount, '0');
    for (int i = 0; i < kClassCount; ++i)
        if (bits[i]) s[i] = '1';
    return s;
}

LabelVector LabelVector::from_string(const std::string& s) {
    if (s.size() != kClassCount)
        throw ValidationError("label string must have 11 bits, got \"" + s + "\"");
    LabelVector v;
    for (int i = 0; i < kClassCount; ++i) {
        if (s[i] != '0' && s[i] != '1')
            throw ValidationError("label string must be 0/1, got \"" + s + "\"");
        v.bits[i] = s[i] == '1';
    }
    return v;
}

LabelVector labels_for(const LayerStack& stack, const PigmentLibrary& lib) {
    LabelVector v;
    double verdigris = 0.0;
    double arsenite = 0.0;
    auto scan = [&](const std::optional<PaintLayer>& layer) {
        if (!layer) return;
        for (const auto& [id, w] : layer->mixture) {
            if (w <= 0.0) continue;
            if (id == kVerdigrisId) verdigris += w;
            if (id == kSodiumArseniteId) arsenite += w;
            int idx = lib.class_index_of(id);
            if (idx >= 0) v.bits[idx] = true;
        }
    };
    scan(stack.top);
    scan(stack.bottom);
    // verdigris + sodium arsenite together stand in for emerald green
    if (verdigris > 0.0 && arsenite > 0.0) {
        int eg = lib.class_index_of(5);
        if (eg >= 0) v.bits[eg] = true;
    }
    return v;
}

}  // namespace xrfpid
