#include "sopflex/sopcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sopflex/errors.hpp"

namespace sopflex {

void validate_design(const SopDesign& design) {
    double sum = 0.0;
    for (double a : design.alpha) {
        if (!(a >= 0.0)) throw ValidationError("converter size fractions must be >= 0");
        sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw ValidationError("converter size fractions must sum to 1");
    if (!(design.p_plus_kva > 0.0)) throw ValidationError("total rating must be positive");
}

SelectorState SelectorState::identity() {
    SelectorState s;
    for (int i = 0; i < 3; ++i) s.b[i][i] = 1;
    return s;
}

SelectorState SelectorState::from_assignment(const std::array<int, 3>& feeder_of_converter) {
    SelectorState s;
    for (int i = 0; i < 3; ++i) {
        int f = feeder_of_converter[i];
        if (f < 0 || f > 2) throw ValidationError("feeder index out of range");
        s.b[i][f] = 1;
    }
    return s;
}

std::array<int, 3> SelectorState::assignment() const {
    std::array<int, 3> f{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (b[i][j]) f[i] = j;
    return f;
}

std::string SelectorState::label() const {
    auto f = assignment();
    std::string s;
    for (int i = 0; i < 3; ++i) s += static_cast<char>('1' + f[i]);
    return s;
}

void validate_state(const SelectorState& state) {
    for (int i = 0; i < 3; ++i) {
        int row = 0;
        for (int j = 0; j < 3; ++j) {
            if (state.b[i][j] != 0 && state.b[i][j] != 1)
                throw ValidationError("selector entries must be 0 or 1");
            row += state.b[i][j];
        }
        if (row != 1)
            throw ValidationError("each converter must be connected to exactly one feeder");
    }
}

const std::vector<SelectorState>& all_selector_states() {
    static const std::vector<SelectorState> states = [] {
        std::vector<SelectorState> all;
        for (int f0 = 0; f0 < 3; ++f0)
            for (int f1 = 0; f1 < 3; ++f1)
                for (int f2 = 0; f2 < 3; ++f2)
                    all.push_back(SelectorState::from_assignment({f0, f1, f2}));
        auto flat = [](const SelectorState& s) {
            std::array<int, 9> v{};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) v[3 * i + j] = s.b[i][j];
            return v;
        };
        std::sort(all.begin(), all.end(),
                  [&](const SelectorState& a, const SelectorState& b) { return flat(a) < flat(b); });
        auto id = SelectorState::identity();
        auto it = std::find(all.begin(), all.end(), id);
        std::rotate(all.begin(), it, it + 1);
        return all;
    }();
    return states;
}

std::array<double, 3> effective_alpha(const SopDesign& design, const SelectorState& state) {
    validate_state(state);
    std::array<double, 3> hat{0, 0, 0};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) hat[j] += state.b[i][j] * design.alpha[i];
    return hat;
}

std::array<double, 3> fic_fixed(const std::array<double, 3>& alpha_hat) {
    double total = alpha_hat[0] + alpha_hat[1] + alpha_hat[2];
    std::array<double, 3> fic{};
    for (int j = 0; j < 3; ++j) fic[j] = std::min(alpha_hat[j], total - alpha_hat[j]);
    return fic;
}

std::array<double, 3> fic_hybrid(const SopDesign& design) {
    validate_design(design);
    std::array<double, 3> best{0, 0, 0};
    for (const auto& s : all_selector_states()) {
        auto fic = fic_fixed(effective_alpha(design, s));
        for (int j = 0; j < 3; ++j) best[j] = std::max(best[j], fic[j]);
    }
    return best;
}

double polygon_area(const Polygon& poly) {
    if (poly.size() < 3) return 0.0;
    double twice = 0.0;
    for (size_t i = 0; i < poly.size(); ++i) {
        const auto& a = poly[i];
        const auto& b = poly[(i + 1) % poly.size()];
        twice += a.p1 * b.p2 - b.p1 * a.p2;
    }
    return 0.5 * twice;
}

namespace {

bool inside(const std::array<double, 3>& a, double x, double y, double tol) {
    return std::abs(x) <= a[0] + tol && std::abs(y) <= a[1] + tol && std::abs(x + y) <= a[2] + tol;
}

}  // namespace

Polygon chart_fixed(const std::array<double, 3>& alpha_hat) {
    for (double a : alpha_hat)
        if (!(a >= 0.0)) throw ValidationError("effective capacities must be >= 0");
    const double a1 = alpha_hat[0], a2 = alpha_hat[1], a3 = alpha_hat[2];

    // Candidate vertices: pairwise intersections of the bounding lines. The
    // three line families (P1 = ±a1, P2 = ±a2, P1+P2 = ±a3) pairwise have
    // unit-determinant normal matrices, so intersections need no division.
    std::vector<ChartPoint> cand;
    for (double s1 : {-1.0, 1.0})
        for (double s2 : {-1.0, 1.0}) {
            cand.push_back({s1 * a1, s2 * a2});                  // |P1| with |P2|
            cand.push_back({s1 * a1, s2 * a3 - s1 * a1});        // |P1| with |P1+P2|
            cand.push_back({s2 * a3 - s1 * a2, s1 * a2});        // |P2| with |P1+P2|
        }
    // Flush -0 to +0 so degenerate charts serialize cleanly.
    for (auto& p : cand) {
        p.p1 += 0.0;
        p.p2 += 0.0;
    }

    const double tol = 1e-12;
    Polygon verts;
    for (const auto& p : cand) {
        if (!inside(alpha_hat, p.p1, p.p2, tol)) continue;
        bool dup = false;
        for (const auto& q : verts)
            dup = dup || (std::abs(q.p1 - p.p1) <= tol && std::abs(q.p2 - p.p2) <= tol);
        if (!dup) verts.push_back(p);
    }

    if (verts.size() <= 2) {
        std::sort(verts.begin(), verts.end(), [](const ChartPoint& a, const ChartPoint& b) {
            return a.p1 != b.p1 ? a.p1 < b.p1 : a.p2 < b.p2;
        });
        return verts;
    }

    ChartPoint centroid{0, 0};
    for (const auto& p : verts) {
        centroid.p1 += p.p1 / verts.size();
        centroid.p2 += p.p2 / verts.size();
    }
    // Three or more surviving candidates are always genuine extreme points
    // here: two boundary lines from different families can only meet at a
    // polygon corner, and zero-area charts never yield more than two distinct
    // candidates. Sorting by angle around the centroid therefore gives the
    // CCW hull directly.
    std::sort(verts.begin(), verts.end(), [&](const ChartPoint& a, const ChartPoint& b) {
        return std::atan2(a.p2 - centroid.p2, a.p1 - centroid.p1) <
               std::atan2(b.p2 - centroid.p2, b.p1 - centroid.p1);
    });
    return verts;
}

CapabilityChart chart_hybrid(const SopDesign& design) {
    validate_design(design);
    CapabilityChart chart;
    chart.design = design;
    for (const auto& s : all_selector_states()) {
        auto hat = effective_alpha(design, s);
        bool dup = false;
        for (const auto& h : chart.alpha_hats)
            dup = dup || (std::abs(h[0] - hat[0]) <= 1e-12 && std::abs(h[1] - hat[1]) <= 1e-12 &&
                          std::abs(h[2] - hat[2]) <= 1e-12);
        if (dup) continue;
        chart.alpha_hats.push_back(hat);
        chart.charts.push_back(chart_fixed(hat));
    }
    return chart;
}

bool contains(const CapabilityChart& chart, double p1, double p2, double tol) {
    for (const auto& hat : chart.alpha_hats)
        if (inside(hat, p1, p2, tol)) return true;
    return false;
}

std::vector<NamedDesign> design_catalogue(double p_plus_kva) {
    const double third = 1.0 / 3.0;
    std::vector<NamedDesign> cases = {
        {"I", {{third, third, third}, p_plus_kva}},
        {"II", {{0.5, 0.5, 0.0}, p_plus_kva}},
        {"III", {{0.4, 0.4, 0.2}, p_plus_kva}},
        {"IV", {{0.5, 0.25, 0.25}, p_plus_kva}},
        {"V", {{0.5, 0.3, 0.2}, p_plus_kva}},
    };
    for (const auto& c : cases) validate_design(c.design);
    return cases;
}

}  // namespace sopflex
