#ifndef XRFPID_PIGMENTS_HPP
#define XRFPID_PIGMENTS_HPP

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xrfpid/elements.hpp"

namespace xrfpid {

inline constexpr int kClassCount = 11;

// Reserved ids for the emerald-green surrogate pair used by mixture recipes.
inline constexpr int kVerdigrisId = 13;
inline constexpr int kSodiumArseniteId = 14;

struct Pigment {
    int id = 0;                // 1..12 library, 13..14 surrogates
    std::string abbreviation;  // "VM", "LW", ...
    std::string name;
    std::map<ElementId, double> composition;  // mass fractions, sum 1
    double density_g_cm3 = 0.0;
    bool is_class = false;     // one of the 11 classifier classes
};

// The 12 bundled pigments plus the two surrogate compounds.
struct PigmentLibrary {
    std::vector<Pigment> pigments;    // ids 1..12, Table order
    std::vector<Pigment> surrogates;  // ids 13..14

    const Pigment& by_id(int id) const;
    const Pigment* find_abbrev(const std::string& abbrev) const;
    // Classifier classes in id order (ids 2..12); index in this list is the
    // label position.
    std::vector<const Pigment*> classes() const;
    int class_index_of(int pigment_id) const;  // -1 if not a class
};

PigmentLibrary load_pigment_library(const std::string& path);
// Built-in copy of data/pigments.dat.
const PigmentLibrary& default_pigment_library();

// One paint layer: mass-fraction mixture over pigment/surrogate ids.
struct PaintLayer {
    std::map<int, double> mixture;  // id -> mass fraction, sum 1
    double thickness_um = 0.0;

    // Reciprocal mixture rule over the component densities.
    double density(const PigmentLibrary& lib) const;
    // Elemental mass fractions of the mixed layer.
    std::map<ElementId, double> element_fractions(const PigmentLibrary& lib) const;
};

PaintLayer make_layer(std::map<int, double> mixture, double thickness_um);
PaintLayer single_pigment_layer(int pigment_id, double thickness_um);

// Three-level stratigraphy; ground is always present.
struct LayerStack {
    std::optional<PaintLayer> top;
    std::optional<PaintLayer> bottom;
    PaintLayer ground;

    std::string describe(const PigmentLibrary& lib) const;
};

LayerStack make_stack(std::optional<PaintLayer> top,
                      std::optional<PaintLayer> bottom,
                      double ground_thickness_um);

// Multi-label ground truth over the 11 classes, id order (pigment id 2 is
// bit 0). A class is present when its pigment has a positive fraction in the
// top or bottom layer; emerald green is also present when the verdigris +
// sodium arsenite pair both appear.
struct LabelVector {
    std::array<bool, kClassCount> bits{};

    bool operator==(const LabelVector&) const = default;
    int count() const;
    std::string to_string() const;  // "01001000010"
    static LabelVector from_string(const std::string& s);
};

LabelVector labels_for(const LayerStack& stack, const PigmentLibrary& lib);

}  // namespace xrfpid

#endif
