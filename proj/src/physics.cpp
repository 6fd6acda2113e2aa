#include "xrfpid/physics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "xrfpid/errors.hpp"
#include "xrfpid/pigments.hpp"

namespace xrfpid {

namespace {

constexpr double kGroupSumTolerance = 1e-6;

std::string strip_comment(const std::string& line) {
    auto hash = line.find('#');
    std::string s = hash == std::string::npos ? line : line.substr(0, hash);
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream iss(s);
    std::string f;
    while (iss >> f) out.push_back(f);
    return out;
}

double parse_double(const std::string& s, const std::string& file, long line) {
    try {
        size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("expected a number, got \"" + s + "\"", file, line);
    }
}

Shell shell_from_string(const std::string& s, const std::string& file, long line) {
    if (s == "K") return Shell::K;
    if (s == "L1") return Shell::L1;
    if (s == "L2") return Shell::L2;
    if (s == "L3") return Shell::L3;
    throw ParseError("unknown shell \"" + s + "\"", file, line);
}

void check_structure(const PhysicsTable& t, const std::string& file) {
    // relative intensities per (element, excitation shell) group sum to 1
    std::map<std::pair<ElementId, Shell>, double> sums;
    for (const auto& ln : t.lines) {
        if (ln.energy_kev <= 0.0)
            throw ValidationError("non-positive line energy for " +
                                  element_symbol(ln.element));
        Shell sh;
        if (series_excitation_shell(ln.series, &sh))
            sums[{ln.element, sh}] += ln.relative_intensity;
    }
    for (const auto& [key, sum] : sums) {
        if (std::abs(sum - 1.0) > kGroupSumTolerance)
            throw ValidationError(
                "relative intensities of " + element_symbol(key.first) + " " +
                shell_name(key.second) + " lines sum to " + std::to_string(sum) +
                " (expected 1) in " + file);
    }
    for (const auto& [el, curve] : t.curves) {
        if (curve.samples.size() < 2)
            throw ValidationError("attenuation curve for " + element_symbol(el) +
                                  " needs at least 2 samples");
        for (size_t i = 0; i < curve.samples.size(); ++i) {
            if (curve.samples[i].second <= 0.0)
                throw ValidationError("non-positive mu_rho for " +
                                      element_symbol(el));
            if (i > 0 && curve.samples[i].first <= curve.samples[i - 1].first)
                throw ValidationError("attenuation samples for " +
                                      element_symbol(el) +
                                      " are not strictly increasing in energy");
        }
        for (size_t i = 1; i < curve.edges.size(); ++i)
            if (curve.edges[i].energy_kev <= curve.edges[i - 1].energy_kev)
                throw ValidationError("edges for " + element_symbol(el) +
                                      " are not ascending");
    }
    for (const auto& [key, p] : t.fp) {
        if (p.edge_energy_kev <= 0.0 || p.fluorescence_yield <= 0.0 ||
            p.fluorescence_yield >= 1.0)
            throw ValidationError("bad fluorescence parameters for " +
                                  element_symbol(key.first));
    }
}

}  // namespace

LineSeries line_series_from_string(const std::string& s) {
    if (s == "Ka") return LineSeries::Ka;
    if (s == "Kb") return LineSeries::Kb;
    if (s == "La") return LineSeries::La;
    if (s == "Lb") return LineSeries::Lb;
    if (s == "Lg") return LineSeries::Lg;
    if (s == "M") return LineSeries::M;
    throw ValidationError("unknown line series \"" + s + "\"");
}

std::string line_series_name(LineSeries s) {
    switch (s) {
        case LineSeries::Ka: return "Ka";
        case LineSeries::Kb: return "Kb";
        case LineSeries::La: return "La";
        case LineSeries::Lb: return "Lb";
        case LineSeries::Lg: return "Lg";
        case LineSeries::M: return "M";
    }
    return "?";
}

std::string shell_name(Shell s) {
    switch (s) {
        case Shell::K: return "K";
        case Shell::L1: return "L1";
        case Shell::L2: return "L2";
        case Shell::L3: return "L3";
    }
    return "?";
}

bool series_excitation_shell(LineSeries series, Shell* out) {
    switch (series) {
        case LineSeries::Ka:
        case LineSeries::Kb: *out = Shell::K; return true;
        case LineSeries::La: *out = Shell::L3; return true;
        case LineSeries::Lb:
        case LineSeries::Lg: *out = Shell::L2; return true;
        case LineSeries::M: return false;
    }
    return false;
}

const AbsorptionCurve& PhysicsTable::curve(ElementId el) const {
    auto it = curves.find(el);
    if (it == curves.end())
        throw IncompletePhysicsError("no attenuation curve for " +
                                     element_symbol(el));
    return it->second;
}

const FluorescenceParams* PhysicsTable::find_fp(ElementId el, Shell shell) const {
    auto it = fp.find({el, shell});
    return it == fp.end() ? nullptr : &it->second;
}

std::vector<EmissionLine> PhysicsTable::lines_of(ElementId el) const {
    std::vector<EmissionLine> out;
    for (const auto& ln : lines)
        if (ln.element == el) out.push_back(ln);
    return out;
}

const EmissionLine* PhysicsTable::find_line(ElementId el, LineSeries series) const {
    for (const auto& ln : lines)
        if (ln.element == el && ln.series == series) return &ln;
    return nullptr;
}

PhysicsTable load_physics_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open physics table \"" + path + "\"");

    PhysicsTable table;
    enum class Section { None, Lines, Attenuation, Fp } section = Section::None;
    ElementId current_element{};
    std::string raw;
    long line_no = 0;
    bool any_content = false;

    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = strip_comment(raw);
        if (line.empty()) continue;
        any_content = true;

        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError("unterminated section header", path, line_no);
            auto fields = split_fields(line.substr(1, line.size() - 2));
            if (fields.size() == 1 && fields[0] == "lines") {
                section = Section::Lines;
            } else if (fields.size() == 1 && fields[0] == "fp") {
                section = Section::Fp;
            } else if (fields.size() == 2 && fields[0] == "attenuation") {
                section = Section::Attenuation;
                current_element = element_from_symbol(fields[1]);
                table.curves[current_element].element = current_element;
            } else {
                throw ParseError("unknown section \"" + line + "\"", path, line_no);
            }
            continue;
        }

        auto f = split_fields(line);
        switch (section) {
            case Section::None:
                throw ParseError("data before any section header", path, line_no);
            case Section::Lines: {
                if (f.size() != 4)
                    throw ParseError("line record needs 4 fields", path, line_no);
                EmissionLine ln;
                ln.element = element_from_symbol(f[0]);
                ln.series = line_series_from_string(f[1]);
                ln.energy_kev = parse_double(f[2], path, line_no);
                ln.relative_intensity = parse_double(f[3], path, line_no);
                table.lines.push_back(ln);
                break;
            }
            case Section::Attenuation: {
                auto& curve = table.curves[current_element];
                if (f[0] == "edge") {
                    if (f.size() != 4)
                        throw ParseError("edge record needs 4 fields", path, line_no);
                    curve.edges.push_back({f[1], parse_double(f[2], path, line_no),
                                           parse_double(f[3], path, line_no)});
                } else if (f[0] == "sample") {
                    if (f.size() != 3)
                        throw ParseError("sample record needs 3 fields", path,
                                         line_no);
                    curve.samples.emplace_back(parse_double(f[1], path, line_no),
                                               parse_double(f[2], path, line_no));
                } else {
                    throw ParseError("unknown attenuation record \"" + f[0] + "\"",
                                     path, line_no);
                }
                break;
            }
            case Section::Fp: {
                if (f.size() != 4)
                    throw ParseError("fp record needs 4 fields", path, line_no);
                FluorescenceParams p;
                p.element = element_from_symbol(f[0]);
                p.shell = shell_from_string(f[1], path, line_no);
                p.edge_energy_kev = parse_double(f[2], path, line_no);
                p.fluorescence_yield = parse_double(f[3], path, line_no);
                table.fp[{p.element, p.shell}] = p;
                break;
            }
        }
    }
    if (!any_content) throw ParseError("empty physics table", path, 1);

    check_structure(table, path);
    return table;
}

PhysicsTable load_physics_table(const std::string& path,
                                const PigmentLibrary& library) {
    PhysicsTable table = load_physics_table(path);
    validate_against_library(table, library);
    return table;
}

void validate_against_library(const PhysicsTable& table,
                              const PigmentLibrary& library) {
    auto check_pigment = [&](const Pigment& pig) {
        for (const auto& [el, frac] : pig.composition) {
            if (frac <= 0.0) continue;
            const std::string where =
                element_symbol(el) + " (" + pig.name + ")";
            if (!table.curves.count(el))
                throw IncompletePhysicsError("incomplete physics: " + where);
            // Emitters with lines above the crop energy need line and
            // fluorescence data; lighter elements are attenuation-only.
            if (el.atomic_number >= 19) {
                bool has_line = false;
                bool has_fp = true;
                for (const auto& ln : table.lines) {
                    if (ln.element != el) continue;
                    has_line = true;
                    Shell sh;
                    if (series_excitation_shell(ln.series, &sh) &&
                        !table.find_fp(el, sh))
                        has_fp = false;
                }
                if (!has_line || !has_fp)
                    throw IncompletePhysicsError("incomplete physics: " + where);
            }
        }
    };
    for (const auto& p : library.pigments) check_pigment(p);
    for (const auto& p : library.surrogates) check_pigment(p);
}

double mu_rho(const PhysicsTable& table, ElementId element, double energy_kev) {
    const AbsorptionCurve& c = table.curve(element);
    const auto& s = c.samples;
    if (energy_kev < c.min_energy() || energy_kev > c.max_energy())
        throw RangeError("energy " + std::to_string(energy_kev) +
                         " keV outside tabulated range [" +
                         std::to_string(c.min_energy()) + ", " +
                         std::to_string(c.max_energy()) + "] for " +
                         element_symbol(element));
    auto it = std::lower_bound(
        s.begin(), s.end(), energy_kev,
        [](const std::pair<double, double>& a, double e) { return a.first < e; });
    if (it->first == energy_kev) return it->second;
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    // log-log linear between samples: exact for power-law segments
    double t = (std::log(energy_kev) - std::log(lo.first)) /
               (std::log(hi.first) - std::log(lo.first));
    return std::exp(std::log(lo.second) +
                    t * (std::log(hi.second) - std::log(lo.second)));
}

double mixture_mu_rho(const PhysicsTable& table,
                      const std::map<ElementId, double>& composition,
                      double energy_kev) {
    double sum = 0.0;
    double total = 0.0;
    for (const auto& [el, w] : composition) {
        if (w < 0.0)
            throw ValidationError("negative mass fraction for " +
                                  element_symbol(el));
        total += w;
        sum += w * mu_rho(table, el, energy_kev);
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw ValidationError("mass fractions sum to " + std::to_string(total) +
                              ", expected 1");
    return sum;
}

double shell_photo_fraction(const PhysicsTable& table, ElementId element,
                            Shell shell, double energy_kev) {
    const AbsorptionCurve& c = table.curve(element);
    const std::string target = shell_name(shell);
    const AbsorptionEdge* shell_edge = nullptr;
    for (const auto& e : c.edges)
        if (e.label == target) shell_edge = &e;
    if (!shell_edge || energy_kev < shell_edge->energy_kev) return 0.0;

    // Walking down from `energy_kev`, each crossed edge strips its shell's
    // share 1 - 1/J of the remaining photoabsorption.
    double remaining = 1.0;
    for (auto it = c.edges.rbegin(); it != c.edges.rend(); ++it) {
        if (it->energy_kev > energy_kev) continue;
        double share = remaining * (1.0 - 1.0 / it->jump_ratio);
        if (it->label == target) return share;
        remaining -= share;
    }
    return 0.0;
}

}  // namespace xrfpid
