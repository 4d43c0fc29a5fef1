#include "fedprompt/io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace fedprompt {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kPromptMagic[8] = {'F', 'P', 'T', 'B', 'I', 'N', '1', '\0'};

void append_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64_le(std::string& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint32_t read_u32_le(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

double read_f64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw std::runtime_error("failed reading " + path.string());
  return content;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

const char* split_name(int split) { return split == 0 ? "train" : (split == 1 ? "val" : "test"); }

void validate_instance(const Instance& inst, const std::filesystem::path& path,
                       std::size_t line_no) {
  const auto fail = [&](const std::string& why) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  if (inst.input.empty()) fail("instance has an empty input");
  if (inst.targets.empty()) fail("instance has no targets");
  for (const auto& target : inst.targets) {
    if (target.empty()) fail("instance has an empty target");
    if (target.back() != kEosToken) fail("target does not end with EOS");
    for (std::size_t i = 0; i + 1 < target.size(); ++i) {
      if (target[i] == kEosToken) fail("EOS appears before the end of a target");
    }
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, end);
}

void write_prompt_file(const std::filesystem::path& path, const Matrix& m) {
  std::string out;
  out.reserve(16 + 8 * m.size());
  out.append(kPromptMagic, sizeof(kPromptMagic));
  append_u32_le(out, static_cast<std::uint32_t>(m.rows()));
  append_u32_le(out, static_cast<std::uint32_t>(m.cols()));
  for (const double d : m.data()) append_f64_le(out, d);
  write_file(path, out);
}

Matrix read_prompt_file(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  if (raw.size() < 16 || std::memcmp(raw.data(), kPromptMagic, sizeof(kPromptMagic)) != 0) {
    throw std::runtime_error(path.string() + ": not a prompt file (bad magic)");
  }
  const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
  const std::uint32_t rows = read_u32_le(bytes + 8);
  const std::uint32_t cols = read_u32_le(bytes + 12);
  const std::size_t expected = 16 + std::size_t{8} * rows * cols;
  if (raw.size() != expected) {
    throw std::runtime_error(path.string() + ": truncated prompt file");
  }
  Matrix m(rows, cols);
  auto data = m.data();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = read_f64_le(bytes + 16 + 8 * i);
  return m;
}

void write_dataset(const std::filesystem::path& dir, const FederatedDataset& ds) {
  std::filesystem::create_directories(dir);

  std::string lines;
  const std::vector<ClientDataset>* splits[3] = {&ds.train_clients, &ds.val_clients,
                                                 &ds.test_clients};
  for (int s = 0; s < 3; ++s) {
    for (const ClientDataset& client : *splits[s]) {
      for (int role = 0; role < 2; ++role) {
        const auto& instances = role == 0 ? client.train : client.eval;
        for (const Instance& inst : instances) {
          ordered_json j;
          j["client_id"] = client.client_id;
          j["split"] = split_name(s);
          j["role"] = role == 0 ? "train" : "eval";
          j["input"] = inst.input;
          j["targets"] = inst.targets;
          j["task"] = inst.task_id;
          j["task_type"] = inst.task_type_id;
          lines += j.dump();
          lines += '\n';
        }
      }
    }
  }
  write_file(dir / "dataset.jsonl", lines);

  ordered_json meta;
  meta["partition"] = to_string(ds.heterogeneity);
  meta["universe_seed"] = ds.universe_seed;
  meta["n_train_clients"] = ds.train_clients.size();
  meta["n_val_clients"] = ds.val_clients.size();
  meta["n_test_clients"] = ds.test_clients.size();
  meta["dropped_train"] = ds.dropped_train;
  meta["dropped_val"] = ds.dropped_val;
  meta["dropped_test"] = ds.dropped_test;
  write_file(dir / "dataset_meta.json", meta.dump(2) + "\n");
}

FederatedDataset load_dataset(const std::filesystem::path& dir) {
  const auto meta_path = dir / "dataset_meta.json";
  const auto jsonl_path = dir / "dataset.jsonl";

  ordered_json meta;
  try {
    meta = ordered_json::parse(read_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(meta_path.string() + ": " + e.what());
  }

  FederatedDataset ds;
  ds.heterogeneity = partition_mode_from_string(meta.at("partition").get<std::string>());
  ds.universe_seed = meta.at("universe_seed").get<std::uint64_t>();
  ds.dropped_train = meta.value("dropped_train", std::size_t{0});
  ds.dropped_val = meta.value("dropped_val", std::size_t{0});
  ds.dropped_test = meta.value("dropped_test", std::size_t{0});

  // client_id -> dataset, per split; reassembled in ascending id order,
  // which matches the order the partitioner assigns ids in.
  std::map<std::int32_t, ClientDataset> by_id[3];

  const std::string raw = read_file(jsonl_path);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    std::size_t end = raw.find('\n', pos);
    if (end == std::string::npos) end = raw.size();
    ++line_no;
    if (end > pos) {
      ordered_json j;
      try {
        j = ordered_json::parse(raw.substr(pos, end - pos));
      } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(jsonl_path.string() + ":" + std::to_string(line_no) + ": " +
                                 e.what());
      }
      const std::string split = j.at("split").get<std::string>();
      int s = -1;
      if (split == "train") s = 0;
      else if (split == "val") s = 1;
      else if (split == "test") s = 2;
      else {
        throw std::runtime_error(jsonl_path.string() + ":" + std::to_string(line_no) +
                                 ": unknown split '" + split + "'");
      }
      const std::string role = j.at("role").get<std::string>();
      if (role != "train" && role != "eval") {
        throw std::runtime_error(jsonl_path.string() + ":" + std::to_string(line_no) +
                                 ": unknown role '" + role + "'");
      }

      Instance inst;
      inst.input = j.at("input").get<std::vector<TokenId>>();
      inst.targets = j.at("targets").get<std::vector<std::vector<TokenId>>>();
      inst.task_id = j.at("task").get<std::int32_t>();
      inst.task_type_id = j.at("task_type").get<std::int32_t>();
      validate_instance(inst, jsonl_path, line_no);

      const auto client_id = j.at("client_id").get<std::int32_t>();
      ClientDataset& client = by_id[s][client_id];
      client.client_id = client_id;
      (role == "train" ? client.train : client.eval).push_back(std::move(inst));
    }
    pos = end + 1;
  }

  for (auto& [id, client] : by_id[0]) ds.train_clients.push_back(std::move(client));
  for (auto& [id, client] : by_id[1]) ds.val_clients.push_back(std::move(client));
  for (auto& [id, client] : by_id[2]) ds.test_clients.push_back(std::move(client));
  return ds;
}

}  // namespace fedprompt
