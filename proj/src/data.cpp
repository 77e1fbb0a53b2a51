#include "xfit/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "xfit/errors.hpp"
#include "xfit/format.hpp"

namespace xfit {

namespace {

void validate_row(std::size_t i, int a, double y) {
    if (a != 0 && a != 1) {
        throw InvalidArgument("observation " + std::to_string(i) + ": treatment must be 0 or 1");
    }
    if (!(y >= 0.0 && y <= 1.0)) {
        throw InvalidArgument("observation " + std::to_string(i) + ": outcome must lie in [0,1]");
    }
}

}  // namespace

Dataset::Dataset(Eigen::MatrixXd covariates, std::vector<int> treatment, std::vector<double> outcome)
    : x_(std::move(covariates)), a_(std::move(treatment)), y_(std::move(outcome)) {
    if (a_.empty()) throw InvalidArgument("dataset must be nonempty");
    if (a_.size() != y_.size() || static_cast<std::size_t>(x_.rows()) != a_.size()) {
        throw InvalidArgument("dataset columns have mismatched lengths");
    }
    if (!x_.allFinite()) throw InvalidArgument("covariates must be finite");
    for (std::size_t i = 0; i < a_.size(); ++i) validate_row(i, a_[i], y_[i]);
}

Dataset::Dataset(std::span<const Observation> observations) {
    if (observations.empty()) throw InvalidArgument("dataset must be nonempty");
    const std::size_t d = observations.front().x.size();
    x_.resize(static_cast<Eigen::Index>(observations.size()), static_cast<Eigen::Index>(d));
    a_.reserve(observations.size());
    y_.reserve(observations.size());
    for (std::size_t i = 0; i < observations.size(); ++i) {
        const auto& o = observations[i];
        if (o.x.size() != d) {
            throw InvalidArgument("observation " + std::to_string(i) + " has covariate dimension " +
                                  std::to_string(o.x.size()) + ", expected " + std::to_string(d));
        }
        for (std::size_t j = 0; j < d; ++j) {
            x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = o.x[j];
        }
        validate_row(i, o.a, o.y);
        a_.push_back(o.a);
        y_.push_back(o.y);
    }
    if (!x_.allFinite()) throw InvalidArgument("covariates must be finite");
}

Observation Dataset::observation(std::size_t i) const {
    Observation o;
    o.x.resize(dim());
    for (std::size_t j = 0; j < dim(); ++j) {
        o.x[j] = x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    o.a = a_.at(i);
    o.y = y_.at(i);
    return o;
}

Eigen::MatrixXd Dataset::covariate_rows(std::span<const std::size_t> indices) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), x_.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = x_.row(static_cast<Eigen::Index>(indices[r]));
    }
    return out;
}

std::size_t Dataset::treated_count() const noexcept {
    return static_cast<std::size_t>(std::count(a_.begin(), a_.end(), 1));
}

FoldPlan::FoldPlan(std::size_t v_count, std::vector<std::size_t> assignment)
    : v_count_(v_count), assignment_(std::move(assignment)), members_(v_count) {
    if (v_count_ < 2) throw InvalidSplit("fold count must be at least 2");
    for (std::size_t i = 0; i < assignment_.size(); ++i) {
        if (assignment_[i] >= v_count_) throw InvalidSplit("fold index out of range");
        members_[assignment_[i]].push_back(i);
    }
    for (const auto& m : members_) {
        if (m.empty()) throw InvalidSplit("every fold must be nonempty");
    }
}

std::vector<std::size_t> FoldPlan::out_of_fold(std::size_t v) const {
    std::vector<std::size_t> out;
    out.reserve(assignment_.size() - members_.at(v).size());
    for (std::size_t i = 0; i < assignment_.size(); ++i) {
        if (assignment_[i] != v) out.push_back(i);
    }
    return out;
}

FoldPlan make_fold_plan(std::size_t n, std::size_t v_count, const RngStream& rng) {
    if (v_count < 2) throw InvalidSplit("fold count must be at least 2");
    if (n < v_count) {
        throw InvalidSplit("cannot split " + std::to_string(n) + " observations into " +
                           std::to_string(v_count) + " folds");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Pcg32 gen(rng);
    gen.shuffle(std::span<std::size_t>(order));

    std::vector<std::size_t> assignment(n);
    const std::size_t base = n / v_count;
    const std::size_t extra = n % v_count;
    std::size_t pos = 0;
    for (std::size_t v = 0; v < v_count; ++v) {
        const std::size_t len = base + (v < extra ? 1 : 0);
        for (std::size_t k = 0; k < len; ++k) assignment[order[pos++]] = v;
    }
    return FoldPlan(v_count, std::move(assignment));
}

double treated_fraction(const Dataset& data, std::span<const std::size_t> indices) {
    if (indices.empty()) throw InvalidArgument("treated_fraction: empty index set");
    std::size_t treated = 0;
    for (std::size_t i : indices) treated += data.a(i) == 1 ? 1 : 0;
    return static_cast<double>(treated) / static_cast<double>(indices.size());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(field.begin());
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw ParseError(where, "not a finite number: '" + s + "'");
    }
    return v;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("header", "empty input");
    const auto header = split_csv_line(line);
    if (header.size() < 3) throw ParseError("header", "expected columns x1..xd,a,y");
    const std::size_t d = header.size() - 2;
    for (std::size_t j = 0; j < d; ++j) {
        if (header[j] != "x" + std::to_string(j + 1)) {
            throw ParseError("header", "column " + std::to_string(j + 1) + " must be named x" +
                                           std::to_string(j + 1) + ", got '" + header[j] + "'");
        }
    }
    if (header[d] != "a" || header[d + 1] != "y") {
        throw ParseError("header", "last two columns must be 'a' and 'y'");
    }

    std::vector<double> xs;
    std::vector<int> as;
    std::vector<double> ys;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        const std::string where = "line " + std::to_string(line_no);
        if (fields.size() != d + 2) {
            throw ParseError(where, "expected " + std::to_string(d + 2) + " fields, got " +
                                        std::to_string(fields.size()));
        }
        for (std::size_t j = 0; j < d; ++j) xs.push_back(parse_double(fields[j], where));
        const double a = parse_double(fields[d], where);
        if (a != 0.0 && a != 1.0) throw ParseError(where, "treatment 'a' must be 0 or 1");
        const double y = parse_double(fields[d + 1], where);
        if (y < 0.0 || y > 1.0) throw ParseError(where, "outcome 'y' must lie in [0,1]");
        as.push_back(static_cast<int>(a));
        ys.push_back(y);
    }
    if (as.empty()) throw ParseError("body", "no observations");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(as.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < as.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i * d + j];
        }
    }
    return Dataset(std::move(x), std::move(as), std::move(ys));
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open file");
    return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
    for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << (j + 1) << ',';
    out << "a,y\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = 0; j < data.dim(); ++j) {
            out << format_double(data.covariates()(static_cast<Eigen::Index>(i),
                                                   static_cast<Eigen::Index>(j)))
                << ',';
        }
        out << data.a(i) << ',' << format_double(data.y(i)) << '\n';
    }
}

}  // namespace xfit
