#include "hrm/dataset.hpp"

#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hrm/errors.hpp"
#include "hrm/rng.hpp"
#include "hrm/solver.hpp"

namespace hrm {

using nlohmann::json;

std::string to_jsonl(const Dataset& data) {
  std::string out;
  for (const Sample& s : data) {
    json line = {{"puzzle", serialize_grid(s.puzzle)},
                 {"solution", serialize_grid(s.solution)},
                 {"box_size", s.puzzle.box_size()}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

Dataset from_jsonl(const std::string& text) {
  Dataset data;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const int n = j.at("box_size").get<int>();
      data.push_back({parse_grid(j.at("puzzle").get<std::string>(), n),
                      parse_grid(j.at("solution").get<std::string>(), n)});
    } catch (const json::exception& e) {
      throw GridError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return data;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return text;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  write_text_file(path, to_jsonl(data));
}

Dataset read_dataset(const std::filesystem::path& path) {
  try {
    return from_jsonl(read_text_file(path));
  } catch (const GridError& e) {
    throw GridError(path.string() + ": " + e.what());
  }
}

Dataset generate_dataset(std::uint64_t seed, int box_size, int count, int target_clues,
                         const Dataset* exclude) {
  std::set<std::string> seen;
  if (exclude != nullptr) {
    for (const Sample& s : *exclude) seen.insert(serialize_grid(s.puzzle));
  }
  Dataset data;
  data.reserve(static_cast<std::size_t>(count));
  const int max_draws = 50 * count + 100;
  for (int draw = 0; static_cast<int>(data.size()) < count; ++draw) {
    if (draw >= max_draws) {
      throw GenerationError("only " + std::to_string(data.size()) + " distinct puzzles found out of " +
                            std::to_string(count) + " requested");
    }
    PuzzleGrid puzzle = generate_puzzle(derive_seed(seed, "puzzle", static_cast<std::uint64_t>(draw)),
                                        box_size, target_clues);
    if (!seen.insert(serialize_grid(puzzle)).second) continue;
    SolveReport report = solve_count(puzzle, 2);
    data.push_back({std::move(puzzle), std::move(*report.first_solution)});
  }
  return data;
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xF];
    value >>= 4;
  }
  return out;
}

std::string dataset_hash(const Dataset& data) { return hex64(fnv1a(to_jsonl(data))); }

}  // namespace hrm
