#include "xrfpid/elements.hpp"

#include <array>
#include <cctype>
#include <unordered_map>

#include "xrfpid/errors.hpp"

namespace xrfpid {

namespace {

struct ElementRecord {
    const char* symbol;
    double weight;  // g/mol, IUPAC conventional values
};

// Indexed by atomic number (index 0 unused).
constexpr std::array<ElementRecord, 99> kElements = {{
    {"", 0.0},
    {"H", 1.008},    {"He", 4.0026},  {"Li", 6.94},    {"Be", 9.0122},
    {"B", 10.81},    {"C", 12.011},   {"N", 14.007},   {"O", 15.999},
    {"F", 18.998},   {"Ne", 20.180},  {"Na", 22.990},  {"Mg", 24.305},
    {"Al", 26.982},  {"Si", 28.085},  {"P", 30.974},   {"S", 32.06},
    {"Cl", 35.45},   {"Ar", 39.948},  {"K", 39.098},   {"Ca", 40.078},
    {"Sc", 44.956},  {"Ti", 47.867},  {"V", 50.942},   {"Cr", 51.996},
    {"Mn", 54.938},  {"Fe", 55.845},  {"Co", 58.933},  {"Ni", 58.693},
    {"Cu", 63.546},  {"Zn", 65.38},   {"Ga", 69.723},  {"Ge", 72.630},
    {"As", 74.922},  {"Se", 78.971},  {"Br", 79.904},  {"Kr", 83.798},
    {"Rb", 85.468},  {"Sr", 87.62},   {"Y", 88.906},   {"Zr", 91.224},
    {"Nb", 92.906},  {"Mo", 95.95},   {"Tc", 97.0},    {"Ru", 101.07},
    {"Rh", 102.91},  {"Pd", 106.42},  {"Ag", 107.87},  {"Cd", 112.41},
    {"In", 114.82},  {"Sn", 118.71},  {"Sb", 121.76},  {"Te", 127.60},
    {"I", 126.90},   {"Xe", 131.29},  {"Cs", 132.91},  {"Ba", 137.33},
    {"La", 138.91},  {"Ce", 140.12},  {"Pr", 140.91},  {"Nd", 144.24},
    {"Pm", 145.0},   {"Sm", 150.36},  {"Eu", 151.96},  {"Gd", 157.25},
    {"Tb", 158.93},  {"Dy", 162.50},  {"Ho", 164.93},  {"Er", 167.26},
    {"Tm", 168.93},  {"Yb", 173.05},  {"Lu", 174.97},  {"Hf", 178.49},
    {"Ta", 180.95},  {"W", 183.84},   {"Re", 186.21},  {"Os", 190.23},
    {"Ir", 192.22},  {"Pt", 195.08},  {"Au", 196.97},  {"Hg", 200.592},
    {"Tl", 204.38},  {"Pb", 207.2},   {"Bi", 208.98},  {"Po", 209.0},
    {"At", 210.0},   {"Rn", 222.0},   {"Fr", 223.0},   {"Ra", 226.0},
    {"Ac", 227.0},   {"Th", 232.04},  {"Pa", 231.04},  {"U", 238.03},
    {"Np", 237.0},   {"Pu", 244.0},   {"Am", 243.0},   {"Cm", 247.0},
    {"Bk", 247.0},   {"Cf", 251.0},
}};

const std::unordered_map<std::string, int>& symbol_index() {
    static const std::unordered_map<std::string, int> idx = [] {
        std::unordered_map<std::string, int> m;
        for (int z = 1; z < static_cast<int>(kElements.size()); ++z)
            m.emplace(kElements[z].symbol, z);
        return m;
    }();
    return idx;
}

void check_z(int z) {
    if (z < 1 || z >= static_cast<int>(kElements.size()))
        throw ValidationError("unknown atomic number " + std::to_string(z));
}

// Recursive-descent parser for one formula unit (no '.' separators).
struct FormulaParser {
    const std::string& s;
    size_t pos = 0;

    explicit FormulaParser(const std::string& text) : s(text) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw ValidationError("bad chemical formula \"" + s + "\": " + what);
    }

    long parse_count() {
        if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos])))
            return 1;
        long n = 0;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos])))
            n = n * 10 + (s[pos++] - '0');
        if (n <= 0) fail("zero count");
        return n;
    }

    // atom counts for a group body up to a closing bracket or end of string
    std::map<ElementId, long> parse_group(char closer) {
        std::map<ElementId, long> atoms;
        while (pos < s.size() && s[pos] != closer) {
            char c = s[pos];
            if (c == '(' || c == '[') {
                ++pos;
                auto inner = parse_group(c == '(' ? ')' : ']');
                if (pos >= s.size()) fail("unclosed bracket");
                ++pos;  // consume closer
                long n = parse_count();
                for (auto& [el, cnt] : inner) atoms[el] += cnt * n;
            } else if (std::isupper(static_cast<unsigned char>(c))) {
                std::string sym(1, c);
                ++pos;
                if (pos < s.size() && std::islower(static_cast<unsigned char>(s[pos])))
                    sym += s[pos++];
                auto it = symbol_index().find(sym);
                if (it == symbol_index().end()) fail("unknown element " + sym);
                atoms[ElementId{it->second}] += parse_count();
            } else {
                fail(std::string("unexpected character '") + c + "'");
            }
        }
        if (closer != '\0' && pos >= s.size()) fail("unclosed bracket");
        return atoms;
    }
};

std::map<ElementId, long> formula_atoms(const std::string& formula) {
    std::map<ElementId, long> atoms;
    size_t start = 0;
    bool any = false;
    while (start <= formula.size()) {
        size_t dot = formula.find('.', start);
        std::string unit = formula.substr(
            start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!unit.empty()) {
            any = true;
            FormulaParser p(unit);
            long mult = p.parse_count();
            auto part = p.parse_group('\0');
            if (part.empty()) p.fail("empty formula unit");
            for (auto& [el, cnt] : part) atoms[el] += cnt * mult;
        }
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    if (!any || atoms.empty())
        throw ValidationError("empty chemical formula");
    return atoms;
}

}  // namespace

ElementId element_from_symbol(const std::string& symbol) {
    auto it = symbol_index().find(symbol);
    if (it == symbol_index().end())
        throw ValidationError("unknown element symbol \"" + symbol + "\"");
    return ElementId{it->second};
}

std::string element_symbol(ElementId el) {
    check_z(el.atomic_number);
    return kElements[el.atomic_number].symbol;
}

double atomic_weight(ElementId el) {
    check_z(el.atomic_number);
    return kElements[el.atomic_number].weight;
}

std::map<ElementId, double> formula_mass_fractions(const std::string& formula) {
    auto atoms = formula_atoms(formula);
    double total = 0.0;
    for (auto& [el, cnt] : atoms) total += atomic_weight(el) * cnt;
    std::map<ElementId, double> out;
    for (auto& [el, cnt] : atoms) out[el] = atomic_weight(el) * cnt / total;
    return out;
}

double formula_molar_mass(const std::string& formula) {
    auto atoms = formula_atoms(formula);
    double total = 0.0;
    for (auto& [el, cnt] : atoms) total += atomic_weight(el) * cnt;
    return total;
}

}  // namespace xrfpid
