#include "milkit/dataset.hpp"

#include "milkit/errors.hpp"
#include "milkit/fileio.hpp"

#include <unordered_set>

namespace milkit {

namespace fs = std::filesystem;

namespace {

std::string label_text(const Label& label) {
    return label ? std::to_string(*label) : std::string("NA");
}

}  // namespace

Dataset::Dataset(std::string name, std::vector<Bag> bags) : name_(std::move(name)), bags_(std::move(bags)) {
    std::unordered_set<std::string> slide_ids;
    for (std::size_t i = 0; i < bags_.size(); ++i) {
        const Bag& bag = bags_[i];
        validate_bag(bag);
        if (bag.slide_id.empty() || bag.patient_id.empty()) {
            throw ValidationError("bag #" + std::to_string(i) + ": slide_id and patient_id must be non-empty");
        }
        if (!slide_ids.insert(bag.slide_id).second) {
            throw ValidationError("duplicate slide_id '" + bag.slide_id + "'");
        }
        if (bag.dim() != bags_.front().dim()) {
            throw DimensionError("slide '" + bag.slide_id + "' has D=" + std::to_string(bag.dim()) +
                                 " but slide '" + bags_.front().slide_id + "' has D=" +
                                 std::to_string(bags_.front().dim()));
        }
        auto [it, inserted] = info_.try_emplace(bag.patient_id);
        PatientInfo& info = it->second;
        if (inserted) {
            info.label = bag.label;
            info.center = bag.center_id;
            patients_.push_back(bag.patient_id);
        } else {
            if (info.label != bag.label) {
                throw ValidationError("patient '" + bag.patient_id + "' has conflicting labels " +
                                      label_text(info.label) + " and " + label_text(bag.label));
            }
            if (info.center != bag.center_id) {
                throw ValidationError("patient '" + bag.patient_id + "' spans centers '" + info.center +
                                      "' and '" + bag.center_id + "'");
            }
        }
        info.bags.push_back(i);
    }
}

Label Dataset::patient_label(const std::string& patient_id) const {
    auto it = info_.find(patient_id);
    if (it == info_.end()) throw ValidationError("unknown patient '" + patient_id + "'");
    return it->second.label;
}

const std::string& Dataset::patient_center(const std::string& patient_id) const {
    auto it = info_.find(patient_id);
    if (it == info_.end()) throw ValidationError("unknown patient '" + patient_id + "'");
    return it->second.center;
}

const std::vector<std::size_t>& Dataset::patient_bags(const std::string& patient_id) const {
    auto it = info_.find(patient_id);
    if (it == info_.end()) throw ValidationError("unknown patient '" + patient_id + "'");
    return it->second.bags;
}

bool Dataset::has_patient(const std::string& patient_id) const {
    return info_.count(patient_id) != 0;
}

std::vector<std::string> Dataset::centers() const {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& p : patients_) {
        const auto& c = info_.at(p).center;
        if (seen.insert(c).second) out.push_back(c);
    }
    return out;
}

Index Dataset::feature_dim() const {
    return bags_.empty() ? 0 : bags_.front().dim();
}

bool Dataset::fully_labeled() const {
    for (const auto& bag : bags_) {
        if (!bag.label) return false;
    }
    return true;
}

std::vector<const Bag*> Dataset::select(const std::set<std::string>& patient_ids) const {
    std::vector<const Bag*> out;
    for (const auto& bag : bags_) {
        if (patient_ids.count(bag.patient_id)) out.push_back(&bag);
    }
    return out;
}

std::vector<const Bag*> Dataset::all() const {
    std::vector<const Bag*> out;
    out.reserve(bags_.size());
    for (const auto& bag : bags_) out.push_back(&bag);
    return out;
}

Dataset Dataset::with_patient_labels(const std::map<std::string, int>& labels) const {
    std::vector<Bag> bags = bags_;
    for (auto& bag : bags) {
        auto it = labels.find(bag.patient_id);
        if (it != labels.end()) bag.label = it->second;
    }
    return Dataset(name_, std::move(bags));
}

std::vector<ManifestRow> read_manifest(const fs::path& path) {
    const auto lines = split_lines(read_file(path));
    if (lines.empty() || lines.front() != "slide_id,patient_id,center_id,label,features_path") {
        throw FormatError("manifest '" + path.string() +
                          "': header must be slide_id,patient_id,center_id,label,features_path");
    }
    std::vector<ManifestRow> rows;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto fields = split_csv_line(lines[i]);
        const std::string where = "manifest '" + path.string() + "' line " + std::to_string(i + 1);
        if (fields.size() != 5) throw FormatError(where + ": expected 5 fields");
        ManifestRow row;
        row.slide_id = fields[0];
        row.patient_id = fields[1];
        row.center_id = fields[2];
        if (fields[3] == "0") {
            row.label = 0;
        } else if (fields[3] == "1") {
            row.label = 1;
        } else if (fields[3] != "NA") {
            throw ValidationError(where + ": label must be 0, 1 or NA, got '" + fields[3] + "'");
        }
        row.features_path = fields[4];
        if (!seen.insert(row.slide_id).second) {
            throw ValidationError(where + ": duplicate slide_id '" + row.slide_id + "'");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_manifest(const std::vector<ManifestRow>& rows, const fs::path& path) {
    std::string out = "slide_id,patient_id,center_id,label,features_path\n";
    for (const auto& row : rows) {
        out += row.slide_id + ',' + row.patient_id + ',' + row.center_id + ',' + label_text(row.label) + ',' +
               row.features_path + '\n';
    }
    write_file_atomic(path, out);
}

Dataset load_dataset(const fs::path& manifest) {
    const auto rows = read_manifest(manifest);
    const fs::path base = manifest.parent_path();
    std::vector<Bag> bags;
    bags.reserve(rows.size());
    for (const auto& row : rows) {
        fs::path file = row.features_path;
        if (file.is_relative()) file = base / file;
        if (!fs::exists(file)) {
            throw IoError("slide '" + row.slide_id + "': feature file '" + file.string() + "' not found");
        }
        Bag bag = read_bag(file);
        bag.slide_id = row.slide_id;
        bag.patient_id = row.patient_id;
        bag.center_id = row.center_id;
        bag.label = row.label;
        bags.push_back(std::move(bag));
    }
    return Dataset(manifest.stem().string(), std::move(bags));
}

}  // namespace milkit
