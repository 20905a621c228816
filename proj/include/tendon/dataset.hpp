#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tendon/healing.hpp"
#include "tendon/image.hpp"

namespace tendon {

struct SubjectInfo {
  std::string id;
  bool is_patient = true;  // false: healthy volunteer, single scan
};

struct SliceRef {
  std::string file;  // path relative to the dataset root
  int slice_index = 0;
  std::uint64_t seed = 0;
  Image pixels;
};

struct ExamRecord {
  std::string subject_id;
  int timepoint = -1;  // 0..9 for patients, -1 for healthy volunteers
  Plane plane = Plane::Sagittal;
  HealingState truth;
  std::vector<SliceRef> slices;
};

struct Dataset {
  std::vector<SubjectInfo> subjects;
  std::vector<ExamRecord> exams;

  const SubjectInfo& subject(const std::string& id) const;
};

// "P003/t4/sagittal"; the key used in error messages and prediction CSVs.
std::string exam_id(const ExamRecord& exam);

// Layout: <root>/manifest.json, <root>/scores.csv, <root>/slices/*.pgm with
// a JSON sidecar per slice. Writing is fully deterministic for a given
// Dataset; loading validates everything eagerly and names the offending
// file (and line, for the CSV) on failure.
void write_dataset(const Dataset& ds, const std::string& root);
Dataset load_dataset(const std::string& root);

}  // namespace tendon
