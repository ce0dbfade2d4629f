#include "hal/basis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <unordered_map>

namespace hal {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

constexpr std::uint64_t kFnvOffset = 0xCBF29CE484222325ULL;

bool subset_allowed(const std::vector<int>& s, const BasisSpec& spec) {
    if (spec.additive_groups.empty()) return true;
    for (const auto& g : spec.additive_groups) {
        if (std::all_of(s.begin(), s.end(), [&](int j) {
                return std::find(g.begin(), g.end(), j) != g.end();
            }))
            return true;
    }
    return false;
}

// Nonempty subsets of {0..d-1} with |s| <= max_degree, ordered by size then
// lexicographically.
std::vector<std::vector<int>> enumerate_subsets(int d, const BasisSpec& spec) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    for (int size = 1; size <= std::min(d, spec.max_degree); ++size) {
        std::vector<int> idx(static_cast<std::size_t>(size));
        std::iota(idx.begin(), idx.end(), 0);
        for (;;) {
            if (subset_allowed(idx, spec)) out.push_back(idx);
            int k = size - 1;
            while (k >= 0 && idx[static_cast<std::size_t>(k)] == d - size + k) --k;
            if (k < 0) break;
            ++idx[static_cast<std::size_t>(k)];
            for (int m = k + 1; m < size; ++m)
                idx[static_cast<std::size_t>(m)] = idx[static_cast<std::size_t>(m - 1)] + 1;
        }
    }
    return out;
}

SignConstraint sign_for(const std::vector<int>& s, const BasisSpec& spec) {
    auto it = spec.sign_constraints.find(s);
    return it == spec.sign_constraints.end() ? SignConstraint::none : it->second;
}

struct ColumnData {
    std::vector<Index> rows;
    std::vector<double> values;
};

ColumnData evaluate_column(const Eigen::MatrixXd& x, const BasisFunction& f) {
    ColumnData col;
    const Index n = x.rows();
    const std::size_t m = f.subset.size();
    for (Index i = 0; i < n; ++i) {
        double v = 1.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double xi = x(i, f.subset[k]);
            const double u = f.knot[k];
            if (f.order == 0) {
                if (xi < u) { v = 0.0; break; }
            } else {
                const double h = xi - u;
                if (h <= 0.0) { v = 0.0; break; }
                v *= h;
            }
        }
        if (v != 0.0) {
            col.rows.push_back(i);
            col.values.push_back(v);
        }
    }
    return col;
}

std::uint64_t column_hash(const ColumnData& c) {
    std::uint64_t h = kFnvOffset;
    h = fnv1a(h, c.rows.data(), c.rows.size() * sizeof(Index));
    h = fnv1a(h, c.values.data(), c.values.size() * sizeof(double));
    return h;
}

// Per-coordinate quantile knots at probabilities k/(q+1), k = 1..q, snapped to
// the nearest observed value. Returns (value, source row) pairs.
std::vector<std::pair<double, Index>> quantile_knots(const Eigen::MatrixXd& x, int j, int q) {
    const Index n = x.rows();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return x(a, j) < x(b, j); });
    std::vector<std::pair<double, Index>> knots;
    for (int k = 1; k <= q; ++k) {
        const double p = static_cast<double>(k) / static_cast<double>(q + 1);
        const auto pos = static_cast<Index>(std::llround(p * static_cast<double>(n - 1)));
        const Index row = order[static_cast<std::size_t>(pos)];
        knots.emplace_back(x(row, j), row);
    }
    return knots;
}

SparseColumns build_sparse(Index rows, const std::vector<ColumnData>& cols) {
    std::size_t nnz = 0;
    for (const auto& c : cols) nnz += c.rows.size();
    SparseColumns m(rows, static_cast<Index>(cols.size()));
    m.reserve(Eigen::VectorXi::Constant(static_cast<Index>(cols.size()), 0));
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(nnz);
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t k = 0; k < cols[c].rows.size(); ++k)
            trip.emplace_back(cols[c].rows[k], static_cast<Index>(c), cols[c].values[k]);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
}

} // namespace

void BasisSpec::validate(int dimension) const {
    if (dimension < 1) throw ConfigError("basis: covariate dimension must be >= 1");
    if (max_degree < 1 || max_degree > dimension)
        throw ConfigError("basis: max_degree=" + std::to_string(max_degree) +
                          " must be in [1, " + std::to_string(dimension) + "]");
    if (knots == KnotStrategy::quantiles && quantile_count < 2)
        throw ConfigError("basis: quantile knot count must be >= 2");
    if (spline_order != 0 && spline_order != 1)
        throw ConfigError("basis: spline_order must be 0 or 1");
    if (max_basis && *max_basis < 1) throw ConfigError("basis: max_basis must be >= 1");
    for (const auto& g : additive_groups)
        for (int j : g)
            if (j < 0 || j >= dimension) throw ConfigError("basis: additive group index out of range");
}

double evaluate_basis(const BasisFunction& f, std::span<const double> x) {
    double v = 1.0;
    for (std::size_t k = 0; k < f.subset.size(); ++k) {
        const double xi = x[static_cast<std::size_t>(f.subset[k])];
        if (f.order == 0) {
            if (xi < f.knot[k]) return 0.0;
        } else {
            v *= std::max(xi - f.knot[k], 0.0);
        }
    }
    return v;
}

std::vector<double> BasisCatalog::support_fraction() const {
    std::vector<double> out(static_cast<std::size_t>(size()));
    const double n = static_cast<double>(rows());
    for (Index j = 0; j < size(); ++j) {
        Index count = 0;
        for (SparseColumns::InnerIterator it(design, j); it; ++it)
            if (it.value() != 0.0) ++count;
        out[static_cast<std::size_t>(j)] = static_cast<double>(count) / n;
    }
    return out;
}

std::size_t candidate_count(Index rows, int dimension, const BasisSpec& spec) {
    std::size_t total = 0;
    for (const auto& s : enumerate_subsets(dimension, spec)) {
        if (spec.knots == KnotStrategy::all_observations) {
            total += static_cast<std::size_t>(rows);
        } else {
            std::size_t c = 1;
            for (std::size_t k = 0; k < s.size(); ++k) c *= static_cast<std::size_t>(spec.quantile_count);
            total += c;
        }
    }
    return total;
}

std::uint64_t catalog_fingerprint(const std::vector<BasisFunction>& functions, Index rows) {
    std::uint64_t h = fnv1a(kFnvOffset, &rows, sizeof rows);
    for (const auto& f : functions) {
        h = fnv1a(h, &f.order, sizeof f.order);
        h = fnv1a(h, f.subset.data(), f.subset.size() * sizeof(int));
        h = fnv1a(h, f.knot.data(), f.knot.size() * sizeof(double));
    }
    return h;
}

BasisCatalog enumerate_basis(const Eigen::MatrixXd& x, const BasisSpec& spec) {
    const int d = static_cast<int>(x.cols());
    const Index n = x.rows();
    spec.validate(d);
    if (n < 1) throw DataError("basis: no rows");

    const std::size_t total = candidate_count(n, d, spec);
    if (static_cast<double>(total) * static_cast<double>(n) > spec.memory_budget_entries)
        throw BudgetError("basis: " + std::to_string(total) + " candidate columns x " +
                          std::to_string(n) + " rows exceeds the memory budget of " +
                          std::to_string(static_cast<long long>(spec.memory_budget_entries)) +
                          " entries");

    std::vector<std::vector<std::pair<double, Index>>> qknots;
    if (spec.knots == KnotStrategy::quantiles)
        for (int j = 0; j < d; ++j) qknots.push_back(quantile_knots(x, j, spec.quantile_count));

    BasisCatalog cat;
    cat.dimension = d;
    cat.pre_dedup_count = total;
    std::vector<ColumnData> columns;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen;

    auto add_candidate = [&](BasisFunction f, std::vector<Index> source, SignConstraint sign) {
        ColumnData col = evaluate_column(x, f);
        if (col.rows.empty()) return;
        const std::uint64_t h = column_hash(col);
        auto& bucket = seen[h];
        for (std::size_t c : bucket) {
            if (columns[c].rows == col.rows && columns[c].values == col.values) {
                auto& prov = cat.provenance[c];
                prov.insert(prov.end(), source.begin(), source.end());
                return;
            }
        }
        bucket.push_back(columns.size());
        columns.push_back(std::move(col));
        cat.functions.push_back(std::move(f));
        cat.provenance.push_back(std::move(source));
        cat.signs.push_back(sign);
    };

    for (const auto& s : enumerate_subsets(d, spec)) {
        const SignConstraint sign = sign_for(s, spec);
        if (spec.knots == KnotStrategy::all_observations) {
            for (Index i = 0; i < n; ++i) {
                BasisFunction f{s, {}, spec.spline_order};
                for (int j : s) f.knot.push_back(x(i, j));
                add_candidate(std::move(f), {i}, sign);
            }
        } else {
            const std::size_t q = static_cast<std::size_t>(spec.quantile_count);
            std::vector<std::size_t> pos(s.size(), 0);
            for (;;) {
                BasisFunction f{s, {}, spec.spline_order};
                std::vector<Index> source;
                for (std::size_t k = 0; k < s.size(); ++k) {
                    const auto& kn = qknots[static_cast<std::size_t>(s[k])][pos[k]];
                    f.knot.push_back(kn.first);
                    source.push_back(kn.second);
                }
                add_candidate(std::move(f), std::move(source), sign);
                std::size_t k = 0;
                while (k < pos.size() && ++pos[k] == q) pos[k++] = 0;
                if (k == pos.size()) break;
            }
        }
    }

    for (auto& p : cat.provenance) {
        std::sort(p.begin(), p.end());
        p.erase(std::unique(p.begin(), p.end()), p.end());
    }
    cat.design = build_sparse(n, columns);
    cat.fingerprint = catalog_fingerprint(cat.functions, n);

    if (spec.max_basis && static_cast<std::size_t>(cat.size()) > *spec.max_basis)
        return rank_by_sparsity(cat, *spec.max_basis);
    return cat;
}

BasisCatalog enumerate_basis(const Dataset& data, const BasisSpec& spec) {
    return enumerate_basis(data.regression_design(), spec);
}

BasisCatalog select_columns(const BasisCatalog& catalog, std::span<const Index> columns) {
    BasisCatalog out;
    out.dimension = catalog.dimension;
    out.pre_dedup_count = catalog.pre_dedup_count;
    std::vector<ColumnData> cols;
    for (Index j : columns) {
        if (j < 0 || j >= catalog.size()) throw ConfigError("select_columns: index out of range");
        ColumnData c;
        for (SparseColumns::InnerIterator it(catalog.design, j); it; ++it) {
            c.rows.push_back(it.row());
            c.values.push_back(it.value());
        }
        cols.push_back(std::move(c));
        out.functions.push_back(catalog.functions[static_cast<std::size_t>(j)]);
        out.provenance.push_back(catalog.provenance[static_cast<std::size_t>(j)]);
        out.signs.push_back(catalog.signs[static_cast<std::size_t>(j)]);
    }
    out.design = build_sparse(catalog.rows(), cols);
    out.fingerprint = catalog_fingerprint(out.functions, catalog.rows());
    return out;
}

BasisCatalog rank_by_sparsity(const BasisCatalog& catalog, std::size_t k) {
    if (k < 1) throw ConfigError("rank_by_sparsity: k must be >= 1");
    const auto p = static_cast<std::size_t>(catalog.size());
    if (k >= p) return catalog;
    const auto support = catalog.support_fraction();
    std::vector<Index> order(p);
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return support[static_cast<std::size_t>(a)] > support[static_cast<std::size_t>(b)];
    });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return select_columns(catalog, order);
}

SparseColumns evaluate_design(const BasisCatalog& catalog, const Eigen::MatrixXd& x) {
    if (x.cols() != catalog.dimension)
        throw ConfigError("evaluate_design: expected " + std::to_string(catalog.dimension) +
                          " columns, got " + std::to_string(x.cols()));
    std::vector<ColumnData> cols;
    cols.reserve(catalog.functions.size());
    for (const auto& f : catalog.functions) cols.push_back(evaluate_column(x, f));
    return build_sparse(x.rows(), cols);
}

Eigen::VectorXd predict(const BasisCatalog& catalog, const Eigen::VectorXd& coefficients,
                        const Eigen::MatrixXd& x) {
    if (coefficients.size() != catalog.size() + 1)
        throw ConfigError("predict: coefficient vector has length " +
                          std::to_string(coefficients.size()) + ", expected " +
                          std::to_string(catalog.size() + 1));
    if (x.cols() != catalog.dimension)
        throw ConfigError("predict: expected " + std::to_string(catalog.dimension) +
                          " columns, got " + std::to_string(x.cols()));
    Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), coefficients(0));
    for (Index j = 0; j < catalog.size(); ++j) {
        const double b = coefficients(j + 1);
        if (b == 0.0) continue;
        const ColumnData col = evaluate_column(x, catalog.functions[static_cast<std::size_t>(j)]);
        for (std::size_t k = 0; k < col.rows.size(); ++k) out(col.rows[k]) += b * col.values[k];
    }
    return out;
}

double sectional_variation_norm(const Eigen::VectorXd& coefficients) {
    return coefficients.cwiseAbs().sum();
}

} // namespace hal
