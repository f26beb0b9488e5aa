#pragma once

#include <string>
#include <vector>

#include "r1ppnp/synth.hpp"
#include "r1ppnp/types.hpp"

namespace r1ppnp {

// A correspondence list ready for solving: image coordinates are centered
// (principal point subtracted) and every point carries the focal length.
struct CorrespondenceSet {
    CameraIntrinsics intrinsics;
    std::vector<Correspondence> points;
};

enum class CorrespondenceFormat { Auto, Json, Csv };

// Reads a correspondence file (JSON document or headered CSV; Auto picks by
// extension) and centers the pixel coordinates with the file's intrinsics.
// Throws ParseError with position diagnostics on malformed input and
// ValidationError on non-positive focal length or fewer than 4 points.
CorrespondenceSet ingest_correspondences(
    const std::string& path,
    CorrespondenceFormat format = CorrespondenceFormat::Auto);

// Writers emit raw pixel coordinates (principal point added back), so the
// files round-trip through ingest_correspondences.
void write_correspondences_json(const CorrespondenceSet& set,
                                const std::string& path);
void write_correspondences_csv(const CorrespondenceSet& set,
                               const std::string& path);

CorrespondenceSet to_correspondence_set(const SyntheticInstance& instance);

// Ground-truth sidecar for synthetic scenes (rotation, translation, mask).
void write_truth_json(const SyntheticInstance& instance,
                      const std::string& path);

}  // namespace r1ppnp
