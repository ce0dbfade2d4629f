#include "hal/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace hal {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(s.substr(start)));
            return out;
        }
        out.push_back(trim(s.substr(start, pos - start)));
        start = pos + 1;
    }
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool is_zero_one(double v) { return v == 0.0 || v == 1.0; }

} // namespace

std::string to_string(OutcomeKind kind) {
    return kind == OutcomeKind::binary ? "binary" : "continuous";
}

OutcomeKind parse_outcome_kind(const std::string& text) {
    const std::string t = lower(trim(text));
    if (t == "binary") return OutcomeKind::binary;
    if (t == "continuous") return OutcomeKind::continuous;
    throw ConfigError("outcome kind must be 'binary' or 'continuous', got '" + text + "'");
}

ColumnRoles parse_roles(const std::string& text) {
    ColumnRoles roles;
    bool have_outcome = false;
    for (const auto& part : split(text, ';')) {
        if (part.empty()) continue;
        const auto eq = part.find('=');
        if (eq == std::string::npos)
            throw ConfigError("role entry '" + part + "' must look like KEY=value");
        const std::string key = lower(trim(std::string_view(part).substr(0, eq)));
        const std::string value = trim(std::string_view(part).substr(eq + 1));
        if (key == "w") {
            for (auto& c : split(value, ','))
                if (!c.empty()) roles.covariates.push_back(c);
        } else if (key == "a") {
            if (!value.empty()) roles.treatment = value;
        } else if (key == "y") {
            if (have_outcome) throw ConfigError("roles: exactly one outcome column allowed");
            roles.outcome = value;
            have_outcome = !value.empty();
        } else if (key == "kind") {
            roles.outcome_kind = parse_outcome_kind(value);
        } else {
            throw ConfigError("roles: unknown key '" + key + "'");
        }
    }
    if (!have_outcome) throw ConfigError("roles: missing outcome (Y=...)");
    if (roles.covariates.empty()) throw ConfigError("roles: at least one covariate (W=...) required");
    return roles;
}

Dataset::Dataset(Eigen::MatrixXd covariates, std::optional<Eigen::VectorXd> treatment,
                 Eigen::VectorXd outcome, OutcomeKind kind,
                 std::vector<std::string> covariate_names, std::string treatment_name,
                 std::string outcome_name)
    : covariates_(std::move(covariates)),
      treatment_(std::move(treatment)),
      outcome_(std::move(outcome)),
      kind_(kind),
      covariate_names_(std::move(covariate_names)),
      treatment_name_(std::move(treatment_name)),
      outcome_name_(std::move(outcome_name)) {
    const Index n = covariates_.rows();
    if (n < 1) throw DataError("dataset must have at least one row");
    if (covariates_.cols() < 1) throw DataError("dataset must have at least one covariate");
    if (outcome_.size() != n) throw DataError("outcome length does not match covariate rows");
    if (treatment_ && treatment_->size() != n)
        throw DataError("treatment length does not match covariate rows");
    if (!covariates_.allFinite() || !outcome_.allFinite() ||
        (treatment_ && !treatment_->allFinite()))
        throw DataError("dataset contains non-finite values");
    if (treatment_) {
        for (Index i = 0; i < n; ++i)
            if (!is_zero_one((*treatment_)(i)))
                throw DataError("treatment value outside {0,1} at row " + std::to_string(i + 1));
    }
    if (kind_ == OutcomeKind::binary) {
        for (Index i = 0; i < n; ++i)
            if (!is_zero_one(outcome_(i)))
                throw DataError("binary outcome value outside {0,1} at row " + std::to_string(i + 1));
    }
    if (covariate_names_.empty()) {
        for (Index j = 0; j < covariates_.cols(); ++j)
            covariate_names_.push_back("w" + std::to_string(j + 1));
    }
    if (static_cast<Index>(covariate_names_.size()) != covariates_.cols())
        throw DataError("covariate name count does not match covariate columns");
}

const Eigen::VectorXd& Dataset::treatment() const {
    if (!treatment_) throw DataError("dataset has no treatment column");
    return *treatment_;
}

std::vector<std::string> Dataset::column_names() const {
    std::vector<std::string> names = covariate_names_;
    if (treatment_) names.push_back(treatment_name_);
    names.push_back(outcome_name_);
    return names;
}

Eigen::MatrixXd Dataset::regression_design() const {
    if (!treatment_) return covariates_;
    Eigen::MatrixXd x(rows(), covariate_count() + 1);
    x.col(0) = *treatment_;
    x.rightCols(covariate_count()) = covariates_;
    return x;
}

Eigen::MatrixXd Dataset::regression_design(double a) const {
    if (!treatment_) throw DataError("counterfactual design requires a treatment column");
    Eigen::MatrixXd x(rows(), covariate_count() + 1);
    x.col(0).setConstant(a);
    x.rightCols(covariate_count()) = covariates_;
    return x;
}

Dataset Dataset::subset(std::span<const Index> idx) const {
    const Index m = static_cast<Index>(idx.size());
    Eigen::MatrixXd w(m, covariate_count());
    Eigen::VectorXd y(m);
    std::optional<Eigen::VectorXd> a;
    if (treatment_) a = Eigen::VectorXd(m);
    for (Index r = 0; r < m; ++r) {
        const Index i = idx[static_cast<std::size_t>(r)];
        if (i < 0 || i >= rows()) throw DataError("subset row index out of range");
        w.row(r) = covariates_.row(i);
        y(r) = outcome_(i);
        if (a) (*a)(r) = (*treatment_)(i);
    }
    return Dataset(std::move(w), std::move(a), std::move(y), kind_, covariate_names_,
                   treatment_name_, outcome_name_);
}

Dataset Dataset::with_outcome(Eigen::VectorXd outcome, OutcomeKind kind) const {
    return Dataset(covariates_, treatment_, std::move(outcome), kind, covariate_names_,
                   treatment_name_, outcome_name_);
}

Dataset load_csv(const std::filesystem::path& path, const ColumnRoles& roles) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("data file '" + path.string() + "' is empty");
    const std::vector<std::string> header = split(line, ',');
    std::map<std::string, std::size_t> column_of;
    for (std::size_t c = 0; c < header.size(); ++c) column_of[header[c]] = c;

    auto locate = [&](const std::string& name, const char* role) {
        auto it = column_of.find(name);
        if (it == column_of.end())
            throw DataError(std::string(role) + " column '" + name + "' not found in header");
        return it->second;
    };
    if (roles.outcome.empty()) throw DataError("outcome role is required");
    if (roles.covariates.empty()) throw DataError("at least one covariate role is required");
    std::vector<std::size_t> w_cols;
    for (const auto& name : roles.covariates) w_cols.push_back(locate(name, "covariate"));
    std::optional<std::size_t> a_col;
    if (roles.treatment) a_col = locate(*roles.treatment, "treatment");
    const std::size_t y_col = locate(roles.outcome, "outcome");

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, found " +
                            std::to_string(cells.size()));
        std::vector<double> values(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string& cell = cells[c];
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
                !std::isfinite(v))
                throw DataError("row " + std::to_string(line_no) + ", column '" + header[c] +
                                "': cannot parse '" + cell + "' as a number");
            values[c] = v;
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw DataError("data file '" + path.string() + "' has no data rows");

    const Index n = static_cast<Index>(rows.size());
    Eigen::MatrixXd w(n, static_cast<Index>(w_cols.size()));
    Eigen::VectorXd y(n);
    std::optional<Eigen::VectorXd> a;
    if (a_col) a = Eigen::VectorXd(n);
    for (Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < w_cols.size(); ++j) w(i, static_cast<Index>(j)) = r[w_cols[j]];
        y(i) = r[y_col];
        if (a_col) {
            const double av = r[*a_col];
            if (!is_zero_one(av))
                throw DataError("row " + std::to_string(i + 2) + ": treatment '" + *roles.treatment +
                                "' value outside {0,1}");
            (*a)(i) = av;
        }
        if (roles.outcome_kind == OutcomeKind::binary && !is_zero_one(y(i)))
            throw DataError("row " + std::to_string(i + 2) + ": binary outcome '" + roles.outcome +
                            "' value outside {0,1}");
    }
    return Dataset(std::move(w), std::move(a), std::move(y), roles.outcome_kind, roles.covariates,
                   roles.treatment.value_or("a"), roles.outcome);
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    const auto names = data.column_names();
    for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
    out << '\n';
    char buf[64];
    auto put = [&](double v, bool first) {
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        if (!first) out << ',';
        out.write(buf, res.ptr - buf);
    };
    for (Index i = 0; i < data.rows(); ++i) {
        for (Index j = 0; j < data.covariate_count(); ++j) put(data.covariates()(i, j), j == 0);
        if (data.has_treatment()) put(data.treatment()(i), false);
        put(data.outcome()(i), false);
        out << '\n';
    }
}

std::vector<Index> FoldPlan::validation_rows(int fold) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == fold) out.push_back(static_cast<Index>(i));
    return out;
}

std::vector<Index> FoldPlan::training_rows(int fold) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] != fold) out.push_back(static_cast<Index>(i));
    return out;
}

std::vector<Index> FoldPlan::fold_sizes() const {
    std::vector<Index> sizes(static_cast<std::size_t>(folds), 0);
    for (int f : assignment) ++sizes[static_cast<std::size_t>(f - 1)];
    return sizes;
}

FoldPlan make_folds(Index rows, int folds, std::uint64_t seed) {
    if (folds < 2 || folds > rows)
        throw ConfigError("fold count V=" + std::to_string(folds) + " must satisfy 2 <= V <= n=" +
                          std::to_string(rows));
    std::vector<Index> order(static_cast<std::size_t>(rows));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    FoldPlan plan;
    plan.folds = folds;
    plan.seed = seed;
    plan.assignment.assign(static_cast<std::size_t>(rows), 0);
    const Index base = rows / folds;
    const Index extra = rows % folds;
    Index pos = 0;
    for (int f = 0; f < folds; ++f) {
        const Index size = base + (f < extra ? 1 : 0);
        for (Index k = 0; k < size; ++k)
            plan.assignment[static_cast<std::size_t>(order[static_cast<std::size_t>(pos++)])] = f + 1;
    }
    return plan;
}

FoldPlan make_folds(const Dataset& data, int folds, std::uint64_t seed) {
    return make_folds(data.rows(), folds, seed);
}

std::vector<Index> resample_indices(Index rows, std::uint64_t seed) {
    if (rows < 1) throw DataError("cannot resample an empty dataset");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Index> pick(0, rows - 1);
    std::vector<Index> draws(static_cast<std::size_t>(rows));
    for (auto& d : draws) d = pick(rng);
    return draws;
}

Dataset resample(const Dataset& data, std::uint64_t seed) {
    const auto draws = resample_indices(data.rows(), seed);
    return data.subset(draws);
}

Eigen::VectorXd multiplicity_weights(std::span<const Index> draws, Index rows) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(rows);
    for (Index i : draws) w(i) += 1.0;
    return w / static_cast<double>(draws.size());
}

} // namespace hal
