#pragma once

#include <filesystem>
#include <string>

#include "fedprompt/data.hpp"
#include "fedprompt/matrix.hpp"

namespace fedprompt {

/// Shortest decimal string that parses back to exactly the same double.
/// Locale-independent, '.' decimal point.
std::string format_double(double v);

/// Prompt matrix file: 8 magic bytes "FPTBIN1\0", then rows and cols as
/// little-endian uint32, then rows*cols doubles (IEEE-754 binary64,
/// little-endian, row-major).
void write_prompt_file(const std::filesystem::path& path, const Matrix& m);
Matrix read_prompt_file(const std::filesystem::path& path);

/// Dataset directory layout: dataset.jsonl (one instance per line with
/// fields client_id, split, role, input, targets, task, task_type) plus
/// dataset_meta.json (partition mode, universe seed, client counts,
/// dropped-instance counts).
void write_dataset(const std::filesystem::path& dir, const FederatedDataset& ds);
FederatedDataset load_dataset(const std::filesystem::path& dir);

}  // namespace fedprompt
