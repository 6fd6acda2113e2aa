#ifndef XRFPID_PHYSICS_HPP
#define XRFPID_PHYSICS_HPP

#include <map>
#include <string>
#include <vector>

#include "xrfpid/elements.hpp"

namespace xrfpid {

struct PigmentLibrary;  // pigments.hpp

enum class LineSeries { Ka, Kb, La, Lb, Lg, M };
enum class Shell { K, L1, L2, L3 };

LineSeries line_series_from_string(const std::string& s);
std::string line_series_name(LineSeries s);
std::string shell_name(Shell s);

// Excitation shell feeding a line series (La -> L3, Lb/Lg -> L2, M lines are
// carried for completeness but not excited by this model).
bool series_excitation_shell(LineSeries series, Shell* out);

// One characteristic line; relative intensities within an (element, shell)
// group sum to 1.
struct EmissionLine {
    ElementId element;
    LineSeries series = LineSeries::Ka;
    double energy_kev = 0.0;
    double relative_intensity = 0.0;
};

struct AbsorptionEdge {
    std::string label;      // "K", "L3", "M1", ...
    double energy_kev = 0.0;
    double jump_ratio = 0.0;
};

// Sampled mass attenuation curve. Samples are strictly increasing in energy;
// edge discontinuities are carried by paired samples at e*(1-1e-6) and e,
// the at-edge sample holding the above-edge value.
struct AbsorptionCurve {
    ElementId element;
    std::vector<std::pair<double, double>> samples;  // (energy keV, cm^2/g)
    std::vector<AbsorptionEdge> edges;               // ascending energy

    double min_energy() const { return samples.front().first; }
    double max_energy() const { return samples.back().first; }
};

struct FluorescenceParams {
    ElementId element;
    Shell shell = Shell::K;
    double edge_energy_kev = 0.0;
    double fluorescence_yield = 0.0;
};

struct PhysicsTable {
    std::vector<EmissionLine> lines;
    std::map<ElementId, AbsorptionCurve> curves;
    std::map<std::pair<ElementId, Shell>, FluorescenceParams> fp;

    const AbsorptionCurve& curve(ElementId el) const;
    const FluorescenceParams* find_fp(ElementId el, Shell shell) const;
    std::vector<EmissionLine> lines_of(ElementId el) const;
    // Line lookup by element and series; nullptr when absent.
    const EmissionLine* find_line(ElementId el, LineSeries series) const;
};

// Parse and validate a physics table file (format: docs/formats.md).
// Structural invariants (ordering, positivity, group sums) are enforced.
PhysicsTable load_physics_table(const std::string& path);

// As above, plus a completeness check against a pigment library: every
// library element needs an attenuation curve, and emitter elements
// (Z >= 19, which have lines above the crop energy) need lines and
// fluorescence parameters. Throws IncompletePhysicsError naming the element
// and the first pigment that requires it.
PhysicsTable load_physics_table(const std::string& path,
                                const PigmentLibrary& library);

void validate_against_library(const PhysicsTable& table,
                              const PigmentLibrary& library);

// Log-log interpolated mass attenuation, cm^2/g. Throws RangeError outside
// the tabulated range.
double mu_rho(const PhysicsTable& table, ElementId element, double energy_kev);

// Mass-fraction weighted mixture attenuation. Fractions must be >= 0 and sum
// to 1 within 1e-9.
double mixture_mu_rho(const PhysicsTable& table,
                      const std::map<ElementId, double>& composition,
                      double energy_kev);

// Fraction of the element's photoabsorption at `energy_kev` that ionizes
// `shell`, derived from the stored edge jump ratios; 0 below the shell edge.
double shell_photo_fraction(const PhysicsTable& table, ElementId element,
                            Shell shell, double energy_kev);

}  // namespace xrfpid

#endif
