#ifndef XRFPID_SIMULATE_HPP
#define XRFPID_SIMULATE_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xrfpid/physics.hpp"
#include "xrfpid/pigments.hpp"
#include "xrfpid/spectrum.hpp"

namespace xrfpid {

struct BeamGeometry {
    double tube_voltage_kv = 40.0;
    double incident_angle_deg = 45.0;  // from sample surface
    double takeoff_angle_deg = 45.0;
    double flux_scale = 1.0e6;
};

void validate_geometry(const BeamGeometry& g);

// Kramers-form continuum: I0(E) = flux_scale * (Emax - E) / E on (0, Emax],
// zero elsewhere.
double tube_spectrum(const BeamGeometry& geometry, double energy_kev);

struct DetectorModel {
    double noise_kev = 0.05;
    double fano_k_kev = 0.0029;
    EnergyCalibration calibration = default_calibration();

    // FWHM(E) = sqrt(noise^2 + k*E); ~140 eV at Mn-Ka with the defaults.
    double fwhm(double energy_kev) const;
};

struct SimConfig {
    BeamGeometry geometry;
    DetectorModel detector;
    std::vector<double> top_thickness_grid;     // µm
    std::vector<double> bottom_thickness_grid;  // µm
    double ground_thickness_um = 175.0;
    Spectrum background;         // added channel-wise; empty = none
    std::uint64_t noise_seed = 0;
    bool poisson = true;
    // Paint layers are modelled as pigment diluted with dried oil medium at
    // this mass fraction (3:1 pigment:binder by weight -> 0.25).
    double binder_mass_fraction = 0.25;
    double quadrature_step_kev = 0.05;
    bool dedupe = false;  // collapse the thickness axis of absent layers
};

// Paper-scale grids: top 50..200 µm and bottom 100..150 µm in 10 µm steps.
SimConfig paper_sim_config();

// Layer resolved to elemental mass fractions and bulk density, binder
// included.
struct ResolvedLayer {
    std::map<ElementId, double> element_fractions;
    double density_g_cm3 = 0.0;
    double thickness_cm = 0.0;
};

ResolvedLayer resolve_layer(const PaintLayer& layer, const PigmentLibrary& lib,
                            double binder_mass_fraction);

// Primary (Sherman) fluorescence for a stratified sample: per line, the
// excitation integral over the tube continuum with overlayer attenuation on
// both paths and within-layer self-absorption, summed across layers. Lines
// at or below 2 keV are dropped. Intensities are in arbitrary beam units.
std::vector<std::pair<EmissionLine, double>> primary_fluorescence(
    const LayerStack& stack, const PhysicsTable& table,
    const BeamGeometry& geometry, const PigmentLibrary& lib,
    double binder_mass_fraction = 0.25, double quadrature_step_kev = 0.05);

// Accumulate Gaussian peaks (area = intensity, sigma = FWHM/2.3548) into
// channels, add the background, then replace counts with seeded Poisson
// draws when requested.
Spectrum render_spectrum(
    const std::vector<std::pair<EmissionLine, double>>& lines,
    const DetectorModel& detector, const Spectrum& background, bool poisson,
    std::uint64_t seed);

struct CorpusEntry {
    std::uint64_t index = 0;
    std::uint64_t seed = 0;
    int group = 0;  // stack-type id, used for stratified splits
    LayerStack stack;
    LabelVector labels;
    Spectrum spectrum;
};

// Full Cartesian grid over ({none} + 12 pigments) x thickness grids for both
// paint layers above a fixed ground. Absent layers still enumerate their
// thickness axis unless config.dedupe is set.
std::uint64_t simulation_corpus_size(const SimConfig& config);
CorpusEntry simulation_corpus_entry(const SimConfig& config,
                                    const PigmentLibrary& lib,
                                    const PhysicsTable& table,
                                    std::uint64_t index);
// Streaming, serial index order.
void generate_simulation_corpus(
    const SimConfig& config, const PigmentLibrary& lib,
    const PhysicsTable& table,
    const std::function<void(const CorpusEntry&)>& sink);
std::vector<CorpusEntry> generate_simulation_corpus(const SimConfig& config,
                                                    const PigmentLibrary& lib,
                                                    const PhysicsTable& table);

// Named paint recipes for the mock-up mixture set: 4 tops x 16 bottoms.
struct MixtureSpec {
    std::string name;
    std::map<int, double> mixture;  // pigment/surrogate id -> mass fraction
};
const std::vector<MixtureSpec>& mockup_top_mixtures();
const std::vector<MixtureSpec>& mockup_bottom_mixtures();
const MixtureSpec& mixture_by_name(const std::string& name);

struct MixtureCorpusConfig {
    BeamGeometry geometry;
    DetectorModel detector;
    std::uint64_t count = 1600;  // total entries, round-robin over 64 stacks
    std::pair<double, double> top_thickness_um{30.0, 200.0};
    std::pair<double, double> bottom_thickness_um{100.0, 150.0};
    std::pair<double, double> ground_thickness_um{150.0, 200.0};
    Spectrum background;
    std::uint64_t seed = 0;
    bool poisson = true;
    double binder_mass_fraction = 0.25;
    double quadrature_step_kev = 0.05;
};

// Simulated stand-in for the measured mock-up corpus: every top x bottom
// recipe pair at randomized thicknesses with Poisson noise.
std::uint64_t mixture_corpus_size(const MixtureCorpusConfig& config);
CorpusEntry mixture_corpus_entry(const MixtureCorpusConfig& config,
                                 const PigmentLibrary& lib,
                                 const PhysicsTable& table,
                                 std::uint64_t index);
void generate_mixture_corpus(
    const MixtureCorpusConfig& config, const PigmentLibrary& lib,
    const PhysicsTable& table,
    const std::function<void(const CorpusEntry&)>& sink);
std::vector<CorpusEntry> generate_mixture_corpus(
    const MixtureCorpusConfig& config, const PigmentLibrary& lib,
    const PhysicsTable& table);

}  // namespace xrfpid

#endif
