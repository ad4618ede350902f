#pragma once

#include <array>
#include <string>
#include <vector>

namespace sopflex {

// A three-converter soft-open-point device: total rating p_plus_kva split
// into size fractions alpha (pu of p_plus, summing to 1).
struct SopDesign {
    std::array<double, 3> alpha{0, 0, 0};
    double p_plus_kva = 0.0;
};

// Throws ValidationError unless alpha >= 0, sum(alpha) == 1 (tol 1e-12) and
// p_plus_kva > 0.
void validate_design(const SopDesign& design);

// Feeder-selector-switch state: b[i][j] = 1 iff converter i is connected to
// feeder j. Every converter is connected to exactly one feeder, so each row
// sums to 1. (A disconnected converter is equivalent to an assigned converter
// carrying zero power, so "exactly one" loses no generality.)
struct SelectorState {
    std::array<std::array<int, 3>, 3> b{};

    static SelectorState identity();
    // feeder_of_converter[i] in {0,1,2}
    static SelectorState from_assignment(const std::array<int, 3>& feeder_of_converter);
    std::array<int, 3> assignment() const;
    // Compact label, 1-based feeder per converter, e.g. "123" for identity.
    std::string label() const;

    bool operator==(const SelectorState&) const = default;
};

void validate_state(const SelectorState& state);

// All 27 selector states in canonical order: the identity state first, then
// the remaining states sorted by the row-major flattening of b.
const std::vector<SelectorState>& all_selector_states();

// Capacity effectively available per feeder: alpha_hat[j] = sum_i b[i][j]*alpha[i].
std::array<double, 3> effective_alpha(const SopDesign& design, const SelectorState& state);

// Feeder interconnection capacity for a fixed configuration with effective
// capacities alpha_hat: FIC_j = min(alpha_hat_j, sum of the others). A feeder
// can export no more than its own converters carry, and no more than the rest
// of the device can absorb.
std::array<double, 3> fic_fixed(const std::array<double, 3>& alpha_hat);

// Best FIC per feeder over all 27 selector states.
std::array<double, 3> fic_hybrid(const SopDesign& design);

struct ChartPoint {
    double p1 = 0.0;
    double p2 = 0.0;
};

// Convex polygon, CCW vertex list. Degenerate charts (segment, point) are
// represented by 2 or 1 vertices.
using Polygon = std::vector<ChartPoint>;

double polygon_area(const Polygon& poly);

// Vertices of {(P1,P2) : |P1| <= a1, |P2| <= a2, |P1+P2| <= a3} (pu).
// Exact construction: every vertex coordinate is a signed sum of alpha_hat
// entries, so no division is involved.
Polygon chart_fixed(const std::array<double, 3>& alpha_hat);

// Union-of-polygons capability region of a hybrid device. alpha_hats holds
// the deduplicated effective-capacity triples over the 27 states, and
// charts[k] is the polygon for alpha_hats[k].
struct CapabilityChart {
    SopDesign design;
    std::vector<std::array<double, 3>> alpha_hats;
    std::vector<Polygon> charts;
};

CapabilityChart chart_hybrid(const SopDesign& design);

// True iff (p1,p2) lies within tol of some constituent polygon.
bool contains(const CapabilityChart& chart, double p1, double p2, double tol = 1e-9);

struct NamedDesign {
    std::string name;
    SopDesign design;
};

// The five studied converter-sizing cases at a given total rating:
//   I   (1/3, 1/3, 1/3)  equal sizing
//   II  (0.5, 0.5, 0)    two converters only
//   III (0.4, 0.4, 0.2)  hybrid chart is a uniform enlargement of Case I's
//   IV  (0.5, 0.25, 0.25)
//   V   (0.5, 0.3, 0.2)
std::vector<NamedDesign> design_catalogue(double p_plus_kva);

}  // namespace sopflex
