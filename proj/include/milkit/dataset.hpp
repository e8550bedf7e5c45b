#pragma once

#include "milkit/bag.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace milkit {

/// A cohort of bags. Patients are the unit of splitting and evaluation.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::string name, std::vector<Bag> bags);

    const std::string& name() const { return name_; }
    const std::vector<Bag>& bags() const { return bags_; }
    std::size_t size() const { return bags_.size(); }
    const Bag& operator[](std::size_t i) const { return bags_[i]; }

    /// Patient ids in order of first appearance.
    const std::vector<std::string>& patients() const { return patients_; }
    /// Patient label, empty when the patient's slides are unlabelled.
    Label patient_label(const std::string& patient_id) const;
    const std::string& patient_center(const std::string& patient_id) const;
    /// Indices of the bags owned by a patient, ascending.
    const std::vector<std::size_t>& patient_bags(const std::string& patient_id) const;
    bool has_patient(const std::string& patient_id) const;

    /// Distinct center ids in order of first appearance.
    std::vector<std::string> centers() const;
    /// Feature dimension shared by all bags (0 when empty).
    Index feature_dim() const;
    bool fully_labeled() const;

    /// Bags of the given patients, in dataset order.
    std::vector<const Bag*> select(const std::set<std::string>& patient_ids) const;
    std::vector<const Bag*> all() const;

    /// Copy with labels replaced, keyed by patient (used for null controls).
    Dataset with_patient_labels(const std::map<std::string, int>& labels) const;

private:
    struct PatientInfo {
        Label label;
        std::string center;
        std::vector<std::size_t> bags;
    };

    std::string name_;
    std::vector<Bag> bags_;
    std::vector<std::string> patients_;
    std::map<std::string, PatientInfo> info_;
};

/// One line of a manifest CSV.
struct ManifestRow {
    std::string slide_id;
    std::string patient_id;
    std::string center_id;
    Label label;
    std::string features_path;
};

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path);

/// Loads every bag listed in a manifest. Relative feature paths resolve
/// against the manifest's directory. Bag order equals row order.
Dataset load_dataset(const std::filesystem::path& manifest);

}  // namespace milkit
