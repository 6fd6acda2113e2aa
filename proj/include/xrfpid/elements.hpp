#ifndef XRFPID_ELEMENTS_HPP
#define XRFPID_ELEMENTS_HPP

#include <map>
#include <string>

namespace xrfpid {

// Chemical element identified by atomic number; symbol lookup is bijective
// within the supported range (H..Cf).
struct ElementId {
    int atomic_number = 0;

    bool operator==(const ElementId&) const = default;
    auto operator<=>(const ElementId&) const = default;
};

// Symbol <-> Z conversions. Throw ValidationError for unknown input.
ElementId element_from_symbol(const std::string& symbol);
std::string element_symbol(ElementId el);

// Standard atomic weight in g/mol.
double atomic_weight(ElementId el);

// Mass fractions per element for a chemical formula such as
// "CaCO3", "Pb3O4", "2PbCO3.Pb(OH)2" or "Cu(CH3COO)2.3Cu(AsO2)2".
// '.' separates formula units; a leading integer multiplies its unit;
// '(' ')' and '[' ']' group with an optional trailing count.
std::map<ElementId, double> formula_mass_fractions(const std::string& formula);

// Molar mass of the same formula grammar, g/mol.
double formula_molar_mass(const std::string& formula);

}  // namespace xrfpid

#endif
