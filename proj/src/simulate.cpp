#include "xrfpid/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "xrfpid/errors.hpp"
#include "xrfpid/rng.hpp"

namespace xrfpid {

namespace {

constexpr double kMinLineEnergyKev = 2.0;
constexpr double kUmToCm = 1.0e-4;
constexpr double kFwhmToSigma = 1.0 / 2.354820045030949;

// Dried oil medium approximated by a triglyceride stoichiometry.
const std::map<ElementId, double>& binder_fractions() {
    static const auto f = formula_mass_fractions("C57H104O6");
    return f;
}
constexpr double kBinderDensity = 0.93;

double gauss_cdf(double x) { return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)); }

struct StackMatter {
    std::vector<ResolvedLayer> layers;  // outermost first, ground last
};

StackMatter resolve_stack(const LayerStack& stack, const PigmentLibrary& lib,
                          double binder) {
    StackMatter m;
    if (stack.top) m.layers.push_back(resolve_layer(*stack.top, lib, binder));
    if (stack.bottom)
        m.layers.push_back(resolve_layer(*stack.bottom, lib, binder));
    m.layers.push_back(resolve_layer(stack.ground, lib, binder));
    return m;
}

}  // namespace

void validate_geometry(const BeamGeometry& g) {
    if (g.tube_voltage_kv <= 0.0)
        throw ValidationError("tube voltage must be positive");
    if (g.incident_angle_deg <= 0.0 || g.incident_angle_deg >= 90.0 ||
        g.takeoff_angle_deg <= 0.0 || g.takeoff_angle_deg >= 90.0)
        throw ValidationError("beam angles must lie strictly between 0 and 90 deg");
    if (g.flux_scale <= 0.0)
        throw ValidationError("flux scale must be positive");
}

double tube_spectrum(const BeamGeometry& geometry, double energy_kev) {
    if (energy_kev <= 0.0 || energy_kev > geometry.tube_voltage_kv) return 0.0;
    return geometry.flux_scale * (geometry.tube_voltage_kv - energy_kev) /
           energy_kev;
}

double DetectorModel::fwhm(double energy_kev) const {
    return std::sqrt(noise_kev * noise_kev + fano_k_kev * energy_kev);
}

SimConfig paper_sim_config() {
    SimConfig c;
    for (int t = 50; t <= 200; t += 10)
        c.top_thickness_grid.push_back(static_cast<double>(t));
    for (int t = 100; t <= 150; t += 10)
        c.bottom_thickness_grid.push_back(static_cast<double>(t));
    return c;
}

ResolvedLayer resolve_layer(const PaintLayer& layer, const PigmentLibrary& lib,
                            double binder_mass_fraction) {
    if (binder_mass_fraction < 0.0 || binder_mass_fraction >= 1.0)
        throw ValidationError("binder mass fraction must lie in [0, 1)");
    ResolvedLayer out;
    const double paint = 1.0 - binder_mass_fraction;
    for (const auto& [el, f] : layer.element_fractions(lib))
        out.element_fractions[el] += paint * f;
    if (binder_mass_fraction > 0.0)
        for (const auto& [el, f] : binder_fractions())
            out.element_fractions[el] += binder_mass_fraction * f;
    out.density_g_cm3 =
        1.0 / (paint / layer.density(lib) + binder_mass_fraction / kBinderDensity);
    out.thickness_cm = layer.thickness_um * kUmToCm;
    return out;
}

std::vector<std::pair<EmissionLine, double>> primary_fluorescence(
    const LayerStack& stack, const PhysicsTable& table,
    const BeamGeometry& geometry, const PigmentLibrary& lib,
    double binder_mass_fraction, double quadrature_step_kev) {
    validate_geometry(geometry);
    if (quadrature_step_kev <= 0.0)
        throw ValidationError("quadrature step must be positive");
    const StackMatter matter = resolve_stack(stack, lib, binder_mass_fraction);
    const double sin_in =
        std::sin(geometry.incident_angle_deg * M_PI / 180.0);
    const double sin_out =
        std::sin(geometry.takeoff_angle_deg * M_PI / 180.0);
    const double e_max = geometry.tube_voltage_kv;

    // Excitation below the lowest usable edge never contributes, and the
    // attenuation tables have a finite floor; the shared midpoint grid over
    // (0, e_max] is therefore only materialized from the first useful node.
    const size_t n_layers = matter.layers.size();
    double e_floor = e_max;
    for (const auto& layer : matter.layers)
        for (const auto& [el, w] : layer.element_fractions) {
            if (w <= 0.0) continue;
            e_floor = std::min(e_floor, table.curve(el).min_energy());
            for (const EmissionLine& line : table.lines_of(el)) {
                Shell shell;
                if (!series_excitation_shell(line.series, &shell)) continue;
                if (const FluorescenceParams* p = table.find_fp(el, shell))
                    e_floor = std::min(e_floor, p->edge_energy_kev);
            }
        }
    for (const auto& layer : matter.layers)
        for (const auto& [el, w] : layer.element_fractions)
            if (w > 0.0)
                e_floor = std::max(e_floor, table.curve(el).min_energy());

    const int n_nodes =
        static_cast<int>(std::floor(e_max / quadrature_step_kev));
    const int i_start = std::max(
        0, static_cast<int>(std::ceil(e_floor / quadrature_step_kev - 0.5)));
    std::vector<double> node_e(n_nodes), node_i0(n_nodes, 0.0);
    for (int i = 0; i < n_nodes; ++i)
        node_e[i] = (i + 0.5) * quadrature_step_kev;
    for (int i = i_start; i < n_nodes; ++i)
        node_i0[i] = tube_spectrum(geometry, node_e[i]);

    // Per-layer mixture attenuation on the node grid, and cumulative
    // incident-path transmission through the layers above each layer.
    std::vector<std::vector<double>> mu_layer(n_layers,
                                              std::vector<double>(n_nodes, 0.0));
    for (size_t li = 0; li < n_layers; ++li)
        for (int i = i_start; i < n_nodes; ++i)
            mu_layer[li][i] = mixture_mu_rho(
                table, matter.layers[li].element_fractions, node_e[i]);
    std::vector<std::vector<double>> trans_in(
        n_layers, std::vector<double>(n_nodes, 1.0));
    for (size_t li = 1; li < n_layers; ++li) {
        const auto& above = matter.layers[li - 1];
        const double rho_t = above.density_g_cm3 * above.thickness_cm;
        for (int i = i_start; i < n_nodes; ++i)
            trans_in[li][i] = trans_in[li - 1][i] *
                              std::exp(-mu_layer[li - 1][i] * rho_t / sin_in);
    }

    std::map<std::pair<ElementId, LineSeries>, std::pair<EmissionLine, double>>
        accum;
    for (size_t li = 0; li < n_layers; ++li) {
        const ResolvedLayer& layer = matter.layers[li];
        const double rho = layer.density_g_cm3;
        const double rho_t = rho * layer.thickness_cm;
        for (const auto& [el, w_el] : layer.element_fractions) {
            if (w_el <= 0.0) continue;
            for (const EmissionLine& line : table.lines_of(el)) {
                if (line.energy_kev <= kMinLineEnergyKev) continue;
                Shell shell;
                if (!series_excitation_shell(line.series, &shell))
                    continue;  // M lines are not excited by this model
                const FluorescenceParams* params = table.find_fp(el, shell);
                if (!params)
                    throw IncompletePhysicsError(
                        "incomplete physics: no " + shell_name(shell) +
                        "-shell fluorescence parameters for " +
                        element_symbol(el));
                if (params->edge_energy_kev >= e_max) continue;

                // exit-path attenuation of the line through the overlayers
                double exit_trans = 1.0;
                for (size_t lj = 0; lj < li; ++lj) {
                    const auto& above = matter.layers[lj];
                    exit_trans *= std::exp(
                        -mixture_mu_rho(table, above.element_fractions,
                                        line.energy_kev) *
                        above.density_g_cm3 * above.thickness_cm / sin_out);
                }
                const double mu_out =
                    mixture_mu_rho(table, layer.element_fractions,
                                   line.energy_kev) / sin_out;

                double integral = 0.0;
                const int first =
                    static_cast<int>(std::ceil(params->edge_energy_kev /
                                                   quadrature_step_kev -
                                               0.5));
                for (int i = std::max(first, i_start); i < n_nodes; ++i) {
                    const double tau = mu_rho(table, el, node_e[i]) *
                                       shell_photo_fraction(table, el, shell,
                                                            node_e[i]);
                    if (tau <= 0.0) continue;
                    const double chi = mu_layer[li][i] / sin_in + mu_out;
                    const double self_abs =
                        -std::expm1(-chi * rho_t) / (chi * rho);
                    integral += node_i0[i] * tau * trans_in[li][i] * self_abs;
                }
                integral *= quadrature_step_kev * w_el *
                            params->fluorescence_yield *
                            line.relative_intensity * exit_trans;
                if (integral <= 0.0) continue;

                auto key = std::make_pair(el, line.series);
                auto it = accum.find(key);
                if (it == accum.end())
                    accum.emplace(key, std::make_pair(line, integral));
                else
                    it->second.second += integral;
            }
        }
    }

    std::vector<std::pair<EmissionLine, double>> out;
    out.reserve(accum.size());
    for (auto& [key, value] : accum) out.push_back(value);
    return out;
}

Spectrum render_spectrum(
    const std::vector<std::pair<EmissionLine, double>>& lines,
    const DetectorModel& detector, const Spectrum& background, bool poisson,
    std::uint64_t seed) {
    const EnergyCalibration& cal = detector.calibration;
    Spectrum out;
    out.calibration = cal;
    out.counts.assign(cal.channel_count, 0.0);

    const double gain = cal.gain_kev_per_ch;
    for (const auto& [line, intensity] : lines) {
        if (intensity <= 0.0) continue;
        const double sigma = detector.fwhm(line.energy_kev) * kFwhmToSigma;
        const int center = cal.channel(line.energy_kev);
        const int halfwidth = static_cast<int>(std::ceil(6.0 * sigma / gain)) + 1;
        const int lo = std::max(0, center - halfwidth);
        const int hi = std::min(cal.channel_count - 1, center + halfwidth);
        for (int ch = lo; ch <= hi; ++ch) {
            const double e_lo = cal.energy(ch) - 0.5 * gain;
            const double e_hi = e_lo + gain;
            out.counts[ch] += intensity *
                              (gauss_cdf((e_hi - line.energy_kev) / sigma) -
                               gauss_cdf((e_lo - line.energy_kev) / sigma));
        }
    }

    if (!background.counts.empty()) {
        if (!(background.calibration == cal))
            throw ValidationError(
                "background calibration does not match the detector");
        for (int ch = 0; ch < cal.channel_count; ++ch)
            out.counts[ch] += background.counts[ch];
    }

    if (poisson) {
        Rng rng(seed);
        for (double& c : out.counts) c = rng.poisson(c);
    }
    return out;
}

std::uint64_t simulation_corpus_size(const SimConfig& config) {
    if (config.top_thickness_grid.empty() || config.bottom_thickness_grid.empty())
        throw ConfigError("thickness grids must be non-empty");
    const std::uint64_t options = 13;  // none + 12 pigments
    const std::uint64_t tt = config.top_thickness_grid.size();
    const std::uint64_t bt = config.bottom_thickness_grid.size();
    if (!config.dedupe) return options * tt * options * bt;
    // absent layers collapse their thickness axis to one entry
    return (12 * tt + 1) * (12 * bt + 1);
}

namespace {

LayerStack stack_for_sim_index(const SimConfig& config, std::uint64_t index,
                               int* group) {
    const std::uint64_t tt = config.top_thickness_grid.size();
    const std::uint64_t bt = config.bottom_thickness_grid.size();
    std::uint64_t rest = index;
    const std::uint64_t b_thick = rest % bt;
    rest /= bt;
    const std::uint64_t b_opt = rest % 13;
    rest /= 13;
    const std::uint64_t t_thick = rest % tt;
    rest /= tt;
    const std::uint64_t t_opt = rest;
    *group = static_cast<int>(t_opt * 13 + b_opt);

    std::optional<PaintLayer> top;
    if (t_opt > 0)
        top = single_pigment_layer(static_cast<int>(t_opt),
                                   config.top_thickness_grid[t_thick]);
    std::optional<PaintLayer> bottom;
    if (b_opt > 0)
        bottom = single_pigment_layer(static_cast<int>(b_opt),
                                      config.bottom_thickness_grid[b_thick]);
    return make_stack(std::move(top), std::move(bottom),
                      config.ground_thickness_um);
}

std::uint64_t sim_index_with_dedupe(const SimConfig& config,
                                    std::uint64_t dense_index) {
    // map a dedupe-corpus position to the full-grid index it represents
    const std::uint64_t tt = config.top_thickness_grid.size();
    const std::uint64_t bt = config.bottom_thickness_grid.size();
    const std::uint64_t bottoms = 12 * bt + 1;
    const std::uint64_t b_dense = dense_index % bottoms;
    const std::uint64_t t_dense = dense_index / bottoms;
    const std::uint64_t t_full =
        t_dense == 0 ? 0 : ((t_dense - 1) / tt + 1) * tt + (t_dense - 1) % tt;
    const std::uint64_t b_full =
        b_dense == 0 ? 0 : ((b_dense - 1) / bt + 1) * bt + (b_dense - 1) % bt;
    return t_full * (13 * bt) + b_full;
}

}  // namespace

CorpusEntry simulation_corpus_entry(const SimConfig& config,
                                    const PigmentLibrary& lib,
                                    const PhysicsTable& table,
                                    std::uint64_t index) {
    if (index >= simulation_corpus_size(config))
        throw RangeError("corpus index out of range");
    const std::uint64_t full_index =
        config.dedupe ? sim_index_with_dedupe(config, index) : index;

    CorpusEntry entry;
    entry.index = index;
    entry.seed = derive_seed(config.noise_seed, full_index);
    entry.stack = stack_for_sim_index(config, full_index, &entry.group);
    entry.labels = labels_for(entry.stack, lib);
    auto lines = primary_fluorescence(entry.stack, table, config.geometry, lib,
                                      config.binder_mass_fraction,
                                      config.quadrature_step_kev);
    entry.spectrum = render_spectrum(lines, config.detector, config.background,
                                     config.poisson, entry.seed);
    return entry;
}

void generate_simulation_corpus(
    const SimConfig& config, const PigmentLibrary& lib,
    const PhysicsTable& table,
    const std::function<void(const CorpusEntry&)>& sink) {
    const std::uint64_t n = simulation_corpus_size(config);
    for (std::uint64_t i = 0; i < n; ++i)
        sink(simulation_corpus_entry(config, lib, table, i));
}

std::vector<CorpusEntry> generate_simulation_corpus(const SimConfig& config,
                                                    const PigmentLibrary& lib,
                                                    const PhysicsTable& table) {
    std::vector<CorpusEntry> out;
    out.reserve(simulation_corpus_size(config));
    generate_simulation_corpus(config, lib, table,
                               [&](const CorpusEntry& e) { out.push_back(e); });
    return out;
}

namespace {

std::map<int, double> pct(std::initializer_list<std::pair<int, double>> parts) {
    std::map<int, double> m;
    for (const auto& [id, p] : parts) m[id] = p / 100.0;
    return m;
}

// ids: 2 CrG, 3 CrY, 4 CB, 5 EG, 6 IO, 7 LW, 8 PB, 9 RL, 10 CM, 11 VM,
// 12 ZW, 13 VG, 14 SA
const std::vector<MixtureSpec> kTopMixtures = {
    {"Top1", pct({{7, 55}, {10, 10}, {8, 25}, {4, 10}})},
    {"Top2", pct({{11, 30}, {10, 30}, {4, 40}})},
    {"Top3", pct({{11, 39}, {3, 6}, {6, 39}, {13, 6}, {14, 10}})},
    {"Top4", pct({{11, 100}})},
};

const std::vector<MixtureSpec> kBottomMixtures = {
    {"Bottom1A", pct({{12, 10}, {7, 10}, {9, 10}, {11, 70}})},
    {"Bottom1B", pct({{12, 10}, {7, 20}, {9, 50}, {11, 20}})},
    {"Bottom1C", pct({{12, 10}, {7, 50}, {9, 20}, {11, 20}})},
    {"Bottom2A", pct({{12, 10}, {7, 85}, {11, 5}})},
    {"Bottom2B", pct({{12, 10.7}, {7, 88.7}, {11, 0.6}})},
    {"Bottom2C", pct({{12, 10}, {7, 50}, {11, 40}})},
    {"Bottom3A", pct({{12, 10}, {7, 15}, {4, 15}, {2, 60}})},
    {"Bottom3B", pct({{12, 10}, {7, 15}, {4, 60}, {2, 15}})},
    {"Bottom3C", pct({{12, 10}, {7, 60}, {4, 15}, {2, 15}})},
    {"Bottom4A", pct({{12, 10}, {7, 45}, {3, 15}, {13, 12}, {14, 18}})},
    {"Bottom4B", pct({{12, 10}, {7, 30}, {3, 30}, {13, 12}, {14, 18}})},
    {"Bottom4C", pct({{12, 10}, {7, 15}, {3, 15}, {13, 24}, {14, 36}})},
    {"Bottom5A", pct({{12, 10}, {11, 5}, {3, 5}, {13, 32}, {14, 48}})},
    {"Bottom5B", pct({{12, 78}, {11, 6}, {3, 6}, {13, 4}, {14, 6}})},
    {"Bottom5C", pct({{12, 10}, {11, 15}, {3, 15}, {13, 24}, {14, 36}})},
    {"Bottom6", pct({{11, 100}})},
};

}  // namespace

const std::vector<MixtureSpec>& mockup_top_mixtures() { return kTopMixtures; }
const std::vector<MixtureSpec>& mockup_bottom_mixtures() {
    return kBottomMixtures;
}

const MixtureSpec& mixture_by_name(const std::string& name) {
    for (const auto& m : kTopMixtures)
        if (m.name == name) return m;
    for (const auto& m : kBottomMixtures)
        if (m.name == name) return m;
    throw ConfigError("unknown mixture \"" + name + "\"");
}

std::uint64_t mixture_corpus_size(const MixtureCorpusConfig& config) {
    return config.count;
}

CorpusEntry mixture_corpus_entry(const MixtureCorpusConfig& config,
                                 const PigmentLibrary& lib,
                                 const PhysicsTable& table,
                                 std::uint64_t index) {
    if (index >= config.count) throw RangeError("corpus index out of range");
    const std::uint64_t n_types =
        kTopMixtures.size() * kBottomMixtures.size();
    const std::uint64_t type = index % n_types;
    const MixtureSpec& top = kTopMixtures[type / kBottomMixtures.size()];
    const MixtureSpec& bottom = kBottomMixtures[type % kBottomMixtures.size()];

    CorpusEntry entry;
    entry.index = index;
    entry.seed = derive_seed(config.seed, index);
    entry.group = static_cast<int>(type);

    Rng rng(entry.seed);
    const double t_top =
        rng.uniform(config.top_thickness_um.first, config.top_thickness_um.second);
    const double t_bottom = rng.uniform(config.bottom_thickness_um.first,
                                        config.bottom_thickness_um.second);
    const double t_ground = rng.uniform(config.ground_thickness_um.first,
                                        config.ground_thickness_um.second);
    LayerStack stack = make_stack(make_layer(top.mixture, t_top),
                                  make_layer(bottom.mixture, t_bottom), t_ground);
    entry.stack = stack;
    entry.labels = labels_for(stack, lib);
    auto lines = primary_fluorescence(stack, table, config.geometry, lib,
                                      config.binder_mass_fraction,
                                      config.quadrature_step_kev);
    // noise stream continues after the thickness draws
    Spectrum noiseless = render_spectrum(lines, config.detector,
                                         config.background, false, 0);
    if (config.poisson)
        for (double& c : noiseless.counts) c = rng.poisson(c);
    entry.spectrum = std::move(noiseless);
    return entry;
}

void generate_mixture_corpus(
    const MixtureCorpusConfig& config, const PigmentLibrary& lib,
    const PhysicsTable& table,
    const std::function<void(const CorpusEntry&)>& sink) {
    for (std::uint64_t i = 0; i < config.count; ++i)
        sink(mixture_corpus_entry(config, lib, table, i));
}

std::vector<CorpusEntry> generate_mixture_corpus(
    const MixtureCorpusConfig& config, const PigmentLibrary& lib,
    const PhysicsTable& table) {
    std::vector<CorpusEntry> out;
    out.reserve(config.count);
    generate_mixture_corpus(config, lib, table,
                            [&](const CorpusEntry& e) { out.push_back(e); });
    return out;
}

}  // namespace xrfpid
