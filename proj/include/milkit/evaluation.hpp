#pragma once

#include "milkit/bag.hpp"
#include "milkit/dataset.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace milkit {

struct PatientPrediction {
    std::string patient_id;
    double probability = 0.0;
    Label label;
};

using SlidePredictions = std::vector<std::pair<std::string, double>>;

/// Mean slide probability per patient, patients in dataset order. Only
/// patients with at least one listed slide appear.
std::vector<PatientPrediction> aggregate_patients(const SlidePredictions& slides, const Dataset& dataset);

/// Per-patient median across models (mean of the two central values for an
/// even count). Every model must cover the same patients; output follows the
/// first model's order.
std::vector<PatientPrediction> ensemble_median(const std::vector<std::vector<PatientPrediction>>& models);

double median(std::vector<double> values);

/// 1-based midranks; tied values share the mean of their ranks.
std::vector<double> midranks(std::span<const double> values);

/// Mann-Whitney AUC with ties counted one half.
double auc(std::span<const double> scores, std::span<const int> labels);
double auc(const std::vector<PatientPrediction>& predictions);

/// Structural components of the AUC: for each positive the fraction of
/// negatives it outscores, and for each negative the fraction of positives
/// that outscore it (ties count one half).
struct Placements {
    std::vector<double> positive;
    std::vector<double> negative;
};
Placements placements(std::span<const double> scores, std::span<const int> labels);

struct AucInterval {
    double auc = 0.0;
    double variance = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

/// DeLong variance with a 95% normal interval clipped to [0, 1].
AucInterval delong_variance(std::span<const double> scores, std::span<const int> labels);
AucInterval delong_variance(const std::vector<PatientPrediction>& predictions);

struct PairedTest {
    double auc_a = 0.0;
    double auc_b = 0.0;
    double var_a = 0.0;
    double var_b = 0.0;
    double covariance = 0.0;
    double z = 0.0;
    double p_value = 1.0;
    /// Variance of the AUC difference is zero (e.g. identical scores);
    /// z is reported as 0 and p as 1.
    bool degenerate = false;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

PairedTest delong_paired_test(std::span<const double> scores_a, std::span<const double> scores_b,
                              std::span<const int> labels);
/// Patients are matched by id; the sets and labels must agree exactly.
PairedTest delong_paired_test(const std::vector<PatientPrediction>& a, const std::vector<PatientPrediction>& b);

struct EvalReport {
    AucInterval interval;
    std::vector<PatientPrediction> predictions;
};

EvalReport evaluate(const std::vector<PatientPrediction>& predictions);

/// `key=value` lines.
std::string format_report(const EvalReport& report);
std::string format_paired_test(const PairedTest& test);

/// CSV `patient_id,label,probability`.
std::string format_patient_csv(const std::vector<PatientPrediction>& predictions);
std::vector<PatientPrediction> parse_patient_csv(std::string_view text, const std::string& what = "patient csv");
std::vector<PatientPrediction> read_patient_csv(const std::filesystem::path& path);

double normal_two_sided_p(double z);

}  // namespace milkit
