#include "moot/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace moot::stats {

double mean(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean of an empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double cliffs_delta(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("Cliff's delta needs two non-empty samples");
    std::vector<double> sorted_b(b.begin(), b.end());
    std::sort(sorted_b.begin(), sorted_b.end());
    long long more = 0, less = 0;
    for (double x : a) {
        auto lo = std::lower_bound(sorted_b.begin(), sorted_b.end(), x);
        auto hi = std::upper_bound(sorted_b.begin(), sorted_b.end(), x);
        less += sorted_b.end() - hi;    // b_j > x
        more += lo - sorted_b.begin();  // b_j < x
    }
    return static_cast<double>(more - less) / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

bool bootstrap_distinct(std::span<const double> a, std::span<const double> b, std::size_t resamples, double alpha,
                        Rng& rng) {
    if (resamples == 0) throw std::invalid_argument("bootstrap needs at least one resample");
    if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("bootstrap needs at least two samples per side");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    const double observed = std::abs(mean(a) - mean(b));

    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::uniform_int_distribution<std::size_t> pick(0, pooled.size() - 1);
    std::vector<double> stat(resamples);
    for (auto& s : stat) {
        double sa = 0.0, sb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) sa += pooled[pick(rng)];
        for (std::size_t i = 0; i < b.size(); ++i) sb += pooled[pick(rng)];
        s = std::abs(sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size()));
    }
    std::sort(stat.begin(), stat.end());
    auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(resamples) - 1e-9));
    k = std::clamp<std::size_t>(k, 1, resamples) - 1;
    return observed > stat[k];
}

namespace {

struct Sorted {
    std::string name;
    std::vector<double> values;
    double mean;
};

std::vector<double> pooled(std::span<const Sorted> items) {
    std::vector<double> out;
    for (const auto& t : items) out.insert(out.end(), t.values.begin(), t.values.end());
    return out;
}

void partition(std::span<const Sorted> items, const ScottKnottOptions& opt, Rng& rng,
               std::vector<std::span<const Sorted>>& groups) {
    if (items.size() < 2) {
        groups.push_back(items);
        return;
    }
    auto all = pooled(items);
    const double grand = mean(all);
    double best_ss = -1.0;
    std::size_t cut = 0;
    for (std::size_t k = 1; k < items.size(); ++k) {
        auto left = pooled(items.first(k));
        auto right = pooled(items.subspan(k));
        double n1 = static_cast<double>(left.size()), n2 = static_cast<double>(right.size());
        double m1 = mean(left), m2 = mean(right);
        double ss = n1 * (m1 - grand) * (m1 - grand) + n2 * (m2 - grand) * (m2 - grand);
        if (ss > best_ss) {
            best_ss = ss;
            cut = k;
        }
    }
    auto left = pooled(items.first(cut));
    auto right = pooled(items.subspan(cut));
    bool split = left.size() >= 2 && right.size() >= 2 &&
                 bootstrap_distinct(left, right, opt.resamples, opt.alpha, rng) &&
                 std::abs(cliffs_delta(left, right)) > opt.small_effect;
    if (!split) {
        groups.push_back(items);
        return;
    }
    partition(items.first(cut), opt, rng, groups);
    partition(items.subspan(cut), opt, rng, groups);
}

}  // namespace

RankedGroups scott_knott(std::vector<TreatmentSamples> treatments, const ScottKnottOptions& options, Rng& rng) {
    if (treatments.empty()) throw std::invalid_argument("Scott-Knott needs at least one treatment");
    std::vector<Sorted> items;
    for (auto& t : treatments) {
        if (t.values.empty()) throw std::invalid_argument("treatment '" + t.name + "' has no samples");
        for (double v : t.values)
            if (!std::isfinite(v)) throw std::invalid_argument("treatment '" + t.name + "' has a non-finite sample");
        double m = mean(t.values);
        items.push_back({std::move(t.name), std::move(t.values), m});
    }
    std::sort(items.begin(), items.end(), [](const Sorted& a, const Sorted& b) {
        return a.mean != b.mean ? a.mean < b.mean : a.name < b.name;
    });
    std::vector<std::span<const Sorted>> groups;
    partition(items, options, rng, groups);

    RankedGroups ranked;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        RankGroup group{static_cast<int>(g), {}, mean(pooled(groups[g]))};
        for (const auto& t : groups[g]) group.members.push_back(t.name);
        ranked.push_back(std::move(group));
    }
    return ranked;
}

RankTable rank_table(const std::map<std::string, RankedGroups>& per_dataset, std::size_t min_rank_columns) {
    if (per_dataset.empty()) throw std::invalid_argument("rank table needs at least one dataset");
    std::set<std::string> expected;
    for (const auto& g : per_dataset.begin()->second) expected.insert(g.members.begin(), g.members.end());

    std::size_t columns = min_rank_columns;
    for (const auto& [dataset, groups] : per_dataset) {
        std::set<std::string> seen;
        for (const auto& g : groups) {
            seen.insert(g.members.begin(), g.members.end());
            columns = std::max(columns, static_cast<std::size_t>(g.rank) + 1);
        }
        if (seen != expected) throw std::invalid_argument("dataset '" + dataset + "' ranks a different treatment set");
    }

    std::map<std::string, std::vector<std::size_t>> counts;
    for (const auto& name : expected) counts[name].assign(columns, 0);
    for (const auto& [dataset, groups] : per_dataset)
        for (const auto& g : groups)
            for (const auto& m : g.members) ++counts[m][static_cast<std::size_t>(g.rank)];

    RankTable table;
    table.datasets = per_dataset.size();
    std::vector<std::pair<std::string, std::vector<int>>> rows;
    const auto total = static_cast<long long>(per_dataset.size());
    for (const auto& [name, c] : counts) {
        // Largest remainder: floor every cell, then hand the missing points to
        // the biggest remainders (lower rank first on ties). This agrees with
        // nearest-integer rounding whenever that already sums to 100.
        std::vector<int> pct(columns);
        std::vector<std::pair<long long, std::size_t>> remainder;
        int assigned = 0;
        for (std::size_t r = 0; r < columns; ++r) {
            long long scaled = 100LL * static_cast<long long>(c[r]);
            pct[r] = static_cast<int>(scaled / total);
            assigned += pct[r];
            remainder.emplace_back(scaled % total, r);
        }
        std::stable_sort(remainder.begin(), remainder.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t i = 0; assigned < 100 && i < remainder.size(); ++i, ++assigned) ++pct[remainder[i].second];
        rows.emplace_back(name, std::move(pct));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second[0] > b.second[0]; });
    for (auto& [name, pct] : rows) {
        table.treatments.push_back(name);
        table.percent.push_back(std::move(pct));
    }
    return table;
}

std::string RankTable::to_csv() const {
    std::ostringstream out;
    out << "treatment";
    for (std::size_t r = 0; r < rank_columns(); ++r) out << ",rank" << r;
    out << '\n';
    for (std::size_t t = 0; t < treatments.size(); ++t) {
        out << treatments[t];
        for (int p : percent[t]) out << ',' << p;
        out << '\n';
    }
    return out.str();
}

std::string RankTable::to_markdown() const {
    std::ostringstream out;
    out << "| treatment |";
    for (std::size_t r = 0; r < rank_columns(); ++r) out << ' ' << r << " |";
    out << "\n|---|";
    for (std::size_t r = 0; r < rank_columns(); ++r) out << "---|";
    out << '\n';
    for (std::size_t t = 0; t < treatments.size(); ++t) {
        out << "| " << treatments[t] << " |";
        for (int p : percent[t]) {
            if (p == 0)
                out << "  |";
            else
                out << ' ' << p << " |";
        }
        out << '\n';
    }
    return out.str();
}

std::size_t neo_samples(double confidence, double epsilon) {
    if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("confidence must lie in (0, 1)");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0, 1)");
    auto reaches = [&](double n) { return -std::expm1(n * std::log1p(-epsilon)) >= confidence; };
    double n = std::max(1.0, std::ceil(std::log1p(-confidence) / std::log1p(-epsilon) - 1e-9));
    // The closed form can land one off when the ratio is (nearly) an integer.
    while (!reaches(n)) n += 1.0;
    while (n > 1.0 && reaches(n - 1.0)) n -= 1.0;
    return static_cast<std::size_t>(n);
}

}  // namespace moot::stats
