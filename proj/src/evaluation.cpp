#include "milkit/evaluation.hpp"

#include "milkit/errors.hpp"
#include "milkit/fileio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace milkit {

namespace {

constexpr double kZ95 = 1.959963984540054;

struct Split {
    std::vector<double> pos;
    std::vector<double> neg;
};

Split split_by_label(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
    Split s;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw ValidationError("score is not finite");
        if (labels[i] == 1) {
            s.pos.push_back(scores[i]);
        } else if (labels[i] == 0) {
            s.neg.push_back(scores[i]);
        } else {
            throw ValidationError("labels must be 0 or 1");
        }
    }
    return s;
}

// Placement values via midranks of the pooled sample (Sun & Xu):
//   V10_i = (R_pooled(x_i) - R_pos(x_i)) / n
//   V01_j = 1 - (R_pooled(y_j) - R_neg(y_j)) / m
Placements placements_of(const Split& s) {
    const std::size_t m = s.pos.size();
    const std::size_t n = s.neg.size();
    std::vector<double> pooled = s.pos;
    pooled.insert(pooled.end(), s.neg.begin(), s.neg.end());
    const auto r_all = midranks(pooled);
    const auto r_pos = midranks(s.pos);
    const auto r_neg = midranks(s.neg);
    Placements p;
    p.positive.resize(m);
    p.negative.resize(n);
    for (std::size_t i = 0; i < m; ++i) p.positive[i] = (r_all[i] - r_pos[i]) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) p.negative[j] = 1.0 - (r_all[m + j] - r_neg[j]) / static_cast<double>(m);
    return p;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Unbiased sample covariance.
double sample_cov(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / static_cast<double>(a.size() - 1);
}

void require_both_classes(const Split& s, std::size_t min_per_class) {
    if (s.pos.size() < min_per_class || s.neg.size() < min_per_class) {
        throw ValidationError("need at least " + std::to_string(min_per_class) +
                              " positive and negative samples, got " + std::to_string(s.pos.size()) + " and " +
                              std::to_string(s.neg.size()));
    }
}

std::pair<std::vector<double>, std::vector<int>> unpack(const std::vector<PatientPrediction>& preds) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& p : preds) {
        if (!p.label) throw ValidationError("patient '" + p.patient_id + "' has no label");
        scores.push_back(p.probability);
        labels.push_back(*p.label);
    }
    return {std::move(scores), std::move(labels)};
}

}  // namespace

std::vector<PatientPrediction> aggregate_patients(const SlidePredictions& slides, const Dataset& dataset) {
    std::map<std::string, std::size_t> slide_index;
    for (std::size_t i = 0; i < dataset.size(); ++i) slide_index[dataset[i].slide_id] = i;

    std::map<std::string, std::pair<double, int>> sums;
    for (const auto& [slide, prob] : slides) {
        auto it = slide_index.find(slide);
        if (it == slide_index.end()) throw ValidationError("unknown slide_id '" + slide + "'");
        if (!std::isfinite(prob)) throw ValidationError("slide '" + slide + "' has a non-finite probability");
        auto& acc = sums[dataset[it->second].patient_id];
        acc.first += prob;
        acc.second += 1;
    }
    std::vector<PatientPrediction> out;
    for (const auto& patient : dataset.patients()) {
        auto it = sums.find(patient);
        if (it == sums.end()) continue;
        out.push_back({patient, it->second.first / it->second.second, dataset.patient_label(patient)});
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw ValidationError("median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<PatientPrediction> ensemble_median(const std::vector<std::vector<PatientPrediction>>& models) {
    if (models.empty()) throw ValidationError("ensemble_median: no models");
    std::map<std::string, std::vector<double>> per_patient;
    for (std::size_t k = 0; k < models.size(); ++k) {
        if (models[k].size() != models.front().size()) {
            throw ValidationError("ensemble_median: model " + std::to_string(k) + " covers " +
                                  std::to_string(models[k].size()) + " patients, model 0 covers " +
                                  std::to_string(models.front().size()));
        }
        for (const auto& p : models[k]) per_patient[p.patient_id].push_back(p.probability);
    }
    std::vector<PatientPrediction> out;
    for (const auto& p : models.front()) {
        const auto& values = per_patient.at(p.patient_id);
        if (values.size() != models.size()) {
            throw ValidationError("ensemble_median: patient '" + p.patient_id + "' is not covered by every model");
        }
        out.push_back({p.patient_id, median(values), p.label});
    }
    return out;
}

std::vector<double> midranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

Placements placements(std::span<const double> scores, std::span<const int> labels) {
    Split s = split_by_label(scores, labels);
    require_both_classes(s, 1);
    return placements_of(s);
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    return mean_of(placements(scores, labels).positive);
}

double auc(const std::vector<PatientPrediction>& predictions) {
    auto [scores, labels] = unpack(predictions);
    return auc(scores, labels);
}

AucInterval delong_variance(std::span<const double> scores, std::span<const int> labels) {
    Split s = split_by_label(scores, labels);
    require_both_classes(s, 2);
    const Placements p = placements_of(s);
    AucInterval out;
    out.n_pos = s.pos.size();
    out.n_neg = s.neg.size();
    out.auc = mean_of(p.positive);
    out.variance = sample_cov(p.positive, p.positive) / static_cast<double>(out.n_pos) +
                   sample_cov(p.negative, p.negative) / static_cast<double>(out.n_neg);
    const double half = kZ95 * std::sqrt(out.variance);
    out.ci_lo = std::clamp(out.auc - half, 0.0, 1.0);
    out.ci_hi = std::clamp(out.auc + half, 0.0, 1.0);
    return out;
}

AucInterval delong_variance(const std::vector<PatientPrediction>& predictions) {
    auto [scores, labels] = unpack(predictions);
    return delong_variance(scores, labels);
}

double normal_two_sided_p(double z) {
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

PairedTest delong_paired_test(std::span<const double> scores_a, std::span<const double> scores_b,
                              std::span<const int> labels) {
    if (scores_a.size() != scores_b.size()) throw DimensionError("paired test: score vectors differ in length");
    Split sa = split_by_label(scores_a, labels);
    Split sb = split_by_label(scores_b, labels);
    require_both_classes(sa, 2);
    const Placements pa = placements_of(sa);
    const Placements pb = placements_of(sb);
    const double m = static_cast<double>(sa.pos.size());
    const double n = static_cast<double>(sa.neg.size());

    PairedTest t;
    t.n_pos = sa.pos.size();
    t.n_neg = sa.neg.size();
    t.auc_a = mean_of(pa.positive);
    t.auc_b = mean_of(pb.positive);
    t.var_a = sample_cov(pa.positive, pa.positive) / m + sample_cov(pa.negative, pa.negative) / n;
    t.var_b = sample_cov(pb.positive, pb.positive) / m + sample_cov(pb.negative, pb.negative) / n;
    t.covariance = sample_cov(pa.positive, pb.positive) / m + sample_cov(pa.negative, pb.negative) / n;
    const double var_diff = t.var_a + t.var_b - 2.0 * t.covariance;
    const double scale = std::max(t.var_a + t.var_b, std::numeric_limits<double>::min());
    if (!(var_diff > 1e-12 * scale)) {
        t.degenerate = true;
        t.z = 0.0;
        t.p_value = 1.0;
        return t;
    }
    t.z = (t.auc_a - t.auc_b) / std::sqrt(var_diff);
    t.p_value = normal_two_sided_p(t.z);
    return t;
}

PairedTest delong_paired_test(const std::vector<PatientPrediction>& a, const std::vector<PatientPrediction>& b) {
    if (a.size() != b.size()) {
        throw ValidationError("paired test: prediction sets cover " + std::to_string(a.size()) + " and " +
                              std::to_string(b.size()) + " patients");
    }
    std::map<std::string, const PatientPrediction*> by_id;
    for (const auto& p : b) by_id[p.patient_id] = &p;
    std::vector<double> sa;
    std::vector<double> sb;
    std::vector<int> labels;
    for (const auto& p : a) {
        auto it = by_id.find(p.patient_id);
        if (it == by_id.end()) throw ValidationError("paired test: patient '" + p.patient_id + "' missing from b");
        if (!p.label || it->second->label != p.label) {
            throw ValidationError("paired test: patient '" + p.patient_id + "' has missing or mismatched labels");
        }
        sa.push_back(p.probability);
        sb.push_back(it->second->probability);
        labels.push_back(*p.label);
    }
    return delong_paired_test(sa, sb, labels);
}

EvalReport evaluate(const std::vector<PatientPrediction>& predictions) {
    return EvalReport{delong_variance(predictions), predictions};
}

std::string format_report(const EvalReport& r) {
    std::string out;
    out += "auc=" + format_double(r.interval.auc) + "\n";
    out += "variance=" + format_double(r.interval.variance) + "\n";
    out += "ci95_lo=" + format_double(r.interval.ci_lo) + "\n";
    out += "ci95_hi=" + format_double(r.interval.ci_hi) + "\n";
    out += "n_pos=" + std::to_string(r.interval.n_pos) + "\n";
    out += "n_neg=" + std::to_string(r.interval.n_neg) + "\n";
    return out;
}

std::string format_paired_test(const PairedTest& t) {
    std::string out;
    out += "auc_a=" + format_double(t.auc_a) + "\n";
    out += "auc_b=" + format_double(t.auc_b) + "\n";
    out += "var_a=" + format_double(t.var_a) + "\n";
    out += "var_b=" + format_double(t.var_b) + "\n";
    out += "covariance=" + format_double(t.covariance) + "\n";
    out += "z=" + format_double(t.z) + "\n";
    out += "p=" + format_double(t.p_value) + "\n";
    out += std::string("degenerate=") + (t.degenerate ? "1" : "0") + "\n";
    out += "n_pos=" + std::to_string(t.n_pos) + "\n";
    out += "n_neg=" + std::to_string(t.n_neg) + "\n";
    return out;
}

std::string format_patient_csv(const std::vector<PatientPrediction>& predictions) {
    std::string out = "patient_id,label,probability\n";
    for (const auto& p : predictions) {
        out += p.patient_id + ',' + (p.label ? std::to_string(*p.label) : std::string("NA")) + ',' +
               format_double(p.probability) + '\n';
    }
    return out;
}

std::vector<PatientPrediction> parse_patient_csv(std::string_view text, const std::string& what) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines.front() != "patient_id,label,probability") {
        throw FormatError(what + ": header must be patient_id,label,probability");
    }
    std::vector<PatientPrediction> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto f = split_csv_line(lines[i]);
        if (f.size() != 3) throw FormatError(what + " line " + std::to_string(i + 1) + ": expected 3 fields");
        PatientPrediction p;
        p.patient_id = f[0];
        if (f[1] == "0" || f[1] == "1") {
            p.label = f[1] == "1" ? 1 : 0;
        } else if (f[1] != "NA") {
            throw ValidationError(what + " line " + std::to_string(i + 1) + ": bad label '" + f[1] + "'");
        }
        p.probability = parse_double(f[2]);
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<PatientPrediction> read_patient_csv(const std::filesystem::path& path) {
    return parse_patient_csv(read_file(path), "'" + path.string() + "'");
}

}  // namespace milkit
