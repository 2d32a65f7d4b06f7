#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hrm/grid.hpp"

namespace hrm {

struct Sample {
  PuzzleGrid puzzle;
  PuzzleGrid solution;
};

using Dataset = std::vector<Sample>;

/// One JSON object per line: {"puzzle": "...", "solution": "...", "box_size": n}.
std::string to_jsonl(const Dataset& data);
Dataset from_jsonl(const std::string& text);

void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);

/// Generates count unique-solution puzzles with at most target_clues clues.
/// Duplicate puzzles are rejected so every sample is distinct; samples whose
/// puzzle appears in exclude are skipped as well.
Dataset generate_dataset(std::uint64_t seed, int box_size, int count, int target_clues,
                         const Dataset* exclude = nullptr);

/// Content hash of the canonical JSON-lines encoding, as 16 hex digits.
std::string dataset_hash(const Dataset& data);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string hex64(std::uint64_t value);

}  // namespace hrm
