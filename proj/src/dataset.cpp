#include "catkit/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "catkit/model.hpp"
#include "catkit/rng.hpp"

namespace catkit {

std::string role_name(Role r) {
  switch (r) {
    case Role::UnbiasedTrain: return "train";
    case Role::UnbiasedVal: return "val";
    case Role::Biased: return "biased";
    case Role::Test: return "test";
  }
  throw std::logic_error("bad role");
}

Role role_from_name(const std::string& s) {
  if (s == "train") return Role::UnbiasedTrain;
  if (s == "val") return Role::UnbiasedVal;
  if (s == "biased") return Role::Biased;
  if (s == "test") return Role::Test;
  throw DataError("unknown role '" + s + "' (expected train|val|biased|test)");
}

std::vector<Interaction> ResponseDataset::slice(Role r) const {
  std::vector<Interaction> out;
  for (const Interaction& z : interactions) {
    auto it = user_roles.find(z.user_id);
    if (it != user_roles.end() && it->second == r) out.push_back(z);
  }
  return out;
}

std::vector<int> ResponseDataset::users_with_role(Role r) const {
  std::vector<int> out;
  for (const auto& [uid, role] : user_roles)
    if (role == r) out.push_back(uid);
  std::sort(out.begin(), out.end());
  return out;
}

std::unordered_map<int, int> ResponseDataset::user_row(int user_id) const {
  std::unordered_map<int, int> row;
  for (const Interaction& z : interactions)
    if (z.user_id == user_id) row[z.item_id] = z.correct;
  return row;
}

ResponseDataset make_dataset(std::vector<Interaction> interactions,
                             std::unordered_map<int, Role> roles,
                             Provenance provenance) {
  std::set<std::pair<int, int>> seen;
  std::set<int> items;
  for (const Interaction& z : interactions) {
    if (z.correct != 0 && z.correct != 1)
      throw DataError("interaction with non-binary correct value");
    if (!roles.count(z.user_id))
      throw DataError("user " + std::to_string(z.user_id) + " has no role");
    if (!seen.insert({z.user_id, z.item_id}).second)
      throw DataError("duplicate interaction (user " + std::to_string(z.user_id) +
                      ", item " + std::to_string(z.item_id) + ")");
    items.insert(z.item_id);
  }
  ResponseDataset d;
  d.interactions = std::move(interactions);
  d.user_roles = std::move(roles);
  d.item_catalog.assign(items.begin(), items.end());
  d.provenance = provenance;
  return d;
}

std::pair<ResponseDataset, SyntheticTruth> generate_synthetic(
    int n_users, int n_items, const SynthConfig& cfg, std::uint64_t seed) {
  if (n_users < 1 || n_items < 1)
    throw std::invalid_argument("generate_synthetic: need n_users, n_items >= 1");
  SyntheticTruth truth;
  truth.a_min = cfg.a_min;
  truth.a_max = cfg.a_max;
  truth.b_mean = cfg.b_mean;
  truth.b_sd = cfg.b_sd;
  truth.theta_mean = cfg.theta_mean;
  truth.theta_sd = cfg.theta_sd;
  truth.seed = seed;

  Rng rng(mix_seed(seed, 0));
  std::uniform_real_distribution<double> ua(cfg.a_min, cfg.a_max);
  std::normal_distribution<double> nb(cfg.b_mean, cfg.b_sd);
  std::normal_distribution<double> nt(cfg.theta_mean, cfg.theta_sd);
  for (int j = 0; j < n_items; ++j) truth.items[j] = ItemParams{ua(rng), nb(rng)};
  for (int u = 0; u < n_users; ++u) truth.thetas[u] = nt(rng);

  // Cell inclusion and responses use per-cell hash draws so the result is a
  // pure function of (config, seed), independent of iteration order.
  std::vector<Interaction> rows;
  rows.reserve(static_cast<std::size_t>(n_users) * n_items);
  std::unordered_map<int, Role> roles;
  roles.reserve(n_users);
  for (int u = 0; u < n_users; ++u) {
    roles[u] = Role::UnbiasedTrain;
    for (int j = 0; j < n_items; ++j) {
      const std::uint64_t cell =
          static_cast<std::uint64_t>(u) * static_cast<std::uint64_t>(n_items) + j;
      if (cfg.fill_fraction < 1.0 &&
          hash_u01(mix_seed(seed, 1), cell) >= cfg.fill_fraction)
        continue;
      const double p = predict_prob(truth.thetas[u], truth.items[j]);
      const int x = hash_u01(mix_seed(seed, 2), cell) < p ? 1 : 0;
      rows.push_back(Interaction{u, j, x});
    }
  }
  ResponseDataset d = make_dataset(std::move(rows), std::move(roles), Provenance::Synthetic);
  return {std::move(d), std::move(truth)};
}

ResponseDataset split_roles(const ResponseDataset& data, const RoleCounts& counts,
                            std::uint64_t seed) {
  if (counts.unbiased_train < 0 || counts.unbiased_val < 0 || counts.biased < 0 ||
      counts.test < 0)
    throw std::invalid_argument("split_roles: negative count");
  std::vector<int> users;
  users.reserve(data.user_roles.size());
  for (const auto& [uid, role] : data.user_roles) users.push_back(uid);
  std::sort(users.begin(), users.end());
  const long need = static_cast<long>(counts.unbiased_train) + counts.unbiased_val +
                    counts.biased + counts.test;
  if (need > static_cast<long>(users.size()))
    throw DataError("split_roles: need " + std::to_string(need) + " users, have " +
                    std::to_string(users.size()));
  Rng rng(mix_seed(seed, 3));
  std::shuffle(users.begin(), users.end(), rng);

  std::unordered_map<int, Role> roles;
  std::size_t k = 0;
  for (int i = 0; i < counts.unbiased_train; ++i) roles[users[k++]] = Role::UnbiasedTrain;
  for (int i = 0; i < counts.unbiased_val; ++i) roles[users[k++]] = Role::UnbiasedVal;
  for (int i = 0; i < counts.biased; ++i) roles[users[k++]] = Role::Biased;
  for (int i = 0; i < counts.test; ++i) roles[users[k++]] = Role::Test;

  std::vector<Interaction> kept;
  for (const Interaction& z : data.interactions)
    if (roles.count(z.user_id)) kept.push_back(z);
  return make_dataset(std::move(kept), std::move(roles), data.provenance);
}

namespace {
std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int parse_int(const std::string& s, const std::string& what, int line_no) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
}
}  // namespace

ResponseDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  bool has_role = false;
  std::vector<Interaction> rows;
  std::unordered_map<int, Role> roles;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_fields(line);
    if (!header_seen) {
      if (f.size() < 3 || f[0] != "user_id" || f[1] != "item_id" || f[2] != "correct")
        throw DataError("line " + std::to_string(line_no) +
                        ": expected header user_id,item_id,correct[,role]");
      has_role = f.size() >= 4 && f[3] == "role";
      header_seen = true;
      continue;
    }
    if (f.size() != (has_role ? 4u : 3u))
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(has_role ? 4 : 3) + " fields, got " +
                      std::to_string(f.size()));
    Interaction z;
    z.user_id = parse_int(f[0], "user_id", line_no);
    z.item_id = parse_int(f[1], "item_id", line_no);
    z.correct = parse_int(f[2], "correct", line_no);
    if (z.correct != 0 && z.correct != 1)
      throw DataError("line " + std::to_string(line_no) + ": correct must be 0 or 1, got '" +
                      f[2] + "'");
    Role r = has_role ? role_from_name(f[3]) : Role::UnbiasedTrain;
    auto it = roles.find(z.user_id);
    if (it == roles.end()) {
      roles[z.user_id] = r;
    } else if (it->second != r) {
      throw DataError("line " + std::to_string(line_no) + ": user " +
                      std::to_string(z.user_id) + " listed with two roles");
    }
    rows.push_back(z);
  }
  if (!header_seen) throw DataError(path + ": missing header");
  try {
    return make_dataset(std::move(rows), std::move(roles), Provenance::Loaded);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void save_csv(const ResponseDataset& data, const std::string& path,
              const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  if (!header_comment.empty()) out << header_comment;
  out << "user_id,item_id,correct,role\n";
  for (const Interaction& z : data.interactions)
    out << z.user_id << ',' << z.item_id << ',' << z.correct << ','
        << role_name(data.user_roles.at(z.user_id)) << '\n';
}

void save_truth_json(const SyntheticTruth& truth, const std::string& path) {
  nlohmann::json j;
  j["config"] = {{"a_min", truth.a_min},       {"a_max", truth.a_max},
                 {"b_mean", truth.b_mean},     {"b_sd", truth.b_sd},
                 {"theta_mean", truth.theta_mean}, {"theta_sd", truth.theta_sd},
                 {"seed", truth.seed}};
  auto& items = j["items"] = nlohmann::json::array();
  for (const auto& [id, it] : truth.items)
    items.push_back({{"item_id", id}, {"a", it.a}, {"b", it.b}});
  auto& users = j["users"] = nlohmann::json::array();
  for (const auto& [id, th] : truth.thetas)
    users.push_back({{"user_id", id}, {"theta", th}});
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
}

SyntheticTruth load_truth_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError(path + ": bad JSON: " + e.what());
  }
  SyntheticTruth t;
  const auto& c = j.at("config");
  t.a_min = c.at("a_min");
  t.a_max = c.at("a_max");
  t.b_mean = c.at("b_mean");
  t.b_sd = c.at("b_sd");
  t.theta_mean = c.at("theta_mean");
  t.theta_sd = c.at("theta_sd");
  t.seed = c.at("seed");
  for (const auto& e : j.at("items"))
    t.items[e.at("item_id")] = ItemParams{e.at("a"), e.at("b")};
  for (const auto& e : j.at("users")) t.thetas[e.at("user_id")] = e.at("theta");
  return t;
}

}  // namespace catkit
