#include <doctest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "catkit/dataset.hpp"
#include "catkit/model.hpp"

using namespace catkit;
namespace fs = std::filesystem;

namespace {

// Throwaway directory, removed on scope exit.
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("catkit_data_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

bool same_interactions(const std::vector<Interaction>& a,
                       const std::vector<Interaction>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].user_id != b[i].user_id || a[i].item_id != b[i].item_id ||
        a[i].correct != b[i].correct)
      return false;
  return true;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("make_dataset invariants") {
    std::vector<Interaction> rows = {{0, 0, 1}, {0, 1, 0}, {1, 0, 1}};
    std::unordered_map<int, Role> roles = {{0, Role::UnbiasedTrain}, {1, Role::Test}};
    const ResponseDataset d = make_dataset(rows, roles, Provenance::Loaded);
    CHECK(d.interactions.size() == 3);
    CHECK(d.item_catalog == std::vector<int>{0, 1});
    CHECK(d.slice(Role::UnbiasedTrain).size() == 2);
    CHECK(d.slice(Role::Test).size() == 1);
    CHECK(d.users_with_role(Role::Test) == std::vector<int>{1});
    const auto row = d.user_row(0);
    CHECK(row.at(0) == 1);
    CHECK(row.at(1) == 0);

    // Missing role, duplicate pair, and non-binary correct are all rejected.
    CHECK_THROWS_AS(make_dataset(rows, {{0, Role::UnbiasedTrain}}, Provenance::Loaded),
                    DataError);
    CHECK_THROWS_AS(
        make_dataset({{0, 0, 1}, {0, 0, 0}}, {{0, Role::UnbiasedTrain}}, Provenance::Loaded),
        DataError);
    CHECK_THROWS_AS(
        make_dataset({{0, 0, 2}}, {{0, Role::UnbiasedTrain}}, Provenance::Loaded), DataError);
  }

  TEST_CASE("role names round-trip") {
    for (Role r : {Role::UnbiasedTrain, Role::UnbiasedVal, Role::Biased, Role::Test})
      CHECK(role_from_name(role_name(r)) == r);
    CHECK(role_name(Role::UnbiasedTrain) == "train");
    CHECK_THROWS_AS(role_from_name("TRAIN"), DataError);
    CHECK_THROWS_AS(role_from_name("holdout"), DataError);
  }

  TEST_CASE("csv round-trip preserves rows, roles, and order") {
    TempDir tmp;
    auto [d, truth] = generate_synthetic(12, 7, SynthConfig{}, 99);
    d = split_roles(d, RoleCounts{5, 2, 3, 2}, 99);
    const std::string p1 = tmp.file("a.csv"), p2 = tmp.file("b.csv");
    save_csv(d, p1);
    const ResponseDataset back = load_csv(p1);
    CHECK(same_interactions(back.interactions, d.interactions));
    CHECK(back.item_catalog == d.item_catalog);
    for (const auto& [uid, role] : d.user_roles) CHECK(back.user_roles.at(uid) == role);
    // Second save is byte-identical: the format has one canonical rendering.
    save_csv(back, p2);
    CHECK(read_text(p1) == read_text(p2));
  }

  TEST_CASE("csv parser skips comments and blanks, defaults role to train") {
    TempDir tmp;
    const std::string p = tmp.file("c.csv");
    write_text(p,
               "# provenance line\n"
               "\n"
               "user_id,item_id,correct\n"
               "# interior comment\n"
               "3,1,1\n"
               "\n"
               "3,2,0\n");
    const ResponseDataset d = load_csv(p);
    CHECK(d.interactions.size() == 2);
    CHECK(d.user_roles.at(3) == Role::UnbiasedTrain);
  }

  TEST_CASE("csv parse errors carry line numbers") {
    TempDir tmp;
    const std::string p = tmp.file("bad.csv");

    write_text(p, "user,item,correct\n1,1,1\n");
    CHECK_THROWS_WITH_AS(load_csv(p),
                         doctest::Contains("line 1: expected header"), DataError);

    write_text(p, "user_id,item_id,correct\n1,1,2\n");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("line 2: correct must be 0 or 1"),
                         DataError);

    write_text(p, "user_id,item_id,correct\n1,1,1\nx,1,0\n");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("line 3: bad user_id 'x'"),
                         DataError);

    write_text(p, "user_id,item_id,correct,role\n1,1,1,train\n1,2,0\n");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("line 3: expected 4 fields, got 3"),
                         DataError);

    write_text(p, "user_id,item_id,correct,role\n1,1,1,train\n1,2,0,test\n");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("listed with two roles"), DataError);

    write_text(p, "user_id,item_id,correct,role\n1,1,1,weird\n");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("unknown role 'weird'"), DataError);

    // Duplicate pair surfaces through make_dataset with the path prefixed.
    write_text(p, "user_id,item_id,correct\n1,1,1\n1,1,0\n");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("duplicate interaction"), DataError);

    CHECK_THROWS_WITH_AS(load_csv(tmp.file("nonexistent.csv")),
                         doctest::Contains("cannot open"), DataError);

    write_text(p, "# only a comment\n");
    CHECK_THROWS_WITH_AS(load_csv(p), doctest::Contains("missing header"), DataError);
  }

  TEST_CASE("csv with header only loads as empty") {
    TempDir tmp;
    const std::string p = tmp.file("empty.csv");
    write_text(p, "user_id,item_id,correct,role\n");
    const ResponseDataset d = load_csv(p);
    CHECK(d.interactions.empty());
    CHECK(d.user_roles.empty());
    CHECK(d.item_catalog.empty());
  }

  TEST_CASE("generate_synthetic is dense, in-range, and seed-deterministic") {
    SynthConfig cfg;
    cfg.a_min = 0.8;
    cfg.a_max = 1.9;
    cfg.b_sd = 0.7;
    cfg.theta_sd = 1.3;
    auto [d1, t1] = generate_synthetic(50, 20, cfg, 1234);
    CHECK(d1.interactions.size() == 50u * 20u);
    CHECK(d1.item_catalog.size() == 20);
    CHECK(t1.items.size() == 20);
    CHECK(t1.thetas.size() == 50);
    CHECK(d1.provenance == Provenance::Synthetic);
    for (const auto& [id, it] : t1.items) {
      CHECK(it.a >= cfg.a_min);
      CHECK(it.a <= cfg.a_max);
    }
    for (const auto& [uid, role] : d1.user_roles) CHECK(role == Role::UnbiasedTrain);

    auto [d2, t2] = generate_synthetic(50, 20, cfg, 1234);
    CHECK(same_interactions(d1.interactions, d2.interactions));
    for (const auto& [id, it] : t1.items) {
      CHECK(t2.items.at(id).a == it.a);
      CHECK(t2.items.at(id).b == it.b);
    }

    auto [d3, t3] = generate_synthetic(50, 20, cfg, 1235);
    CHECK_FALSE(same_interactions(d1.interactions, d3.interactions));

    CHECK_THROWS_AS(generate_synthetic(0, 20, cfg, 1), std::invalid_argument);
    CHECK_THROWS_AS(generate_synthetic(50, 0, cfg, 1), std::invalid_argument);
  }

  TEST_CASE("generate_synthetic responses track item difficulty") {
    // Over 500 users, the easiest item must collect strictly more correct
    // answers than the hardest one; anything else means the response model is
    // miswired.
    auto [d, truth] = generate_synthetic(500, 12, SynthConfig{}, 7);
    int easiest = -1, hardest = -1;
    for (const auto& [id, it] : truth.items) {
      if (easiest < 0 || it.b < truth.items.at(easiest).b) easiest = id;
      if (hardest < 0 || it.b > truth.items.at(hardest).b) hardest = id;
    }
    REQUIRE(truth.items.at(easiest).b + 0.5 < truth.items.at(hardest).b);
    int correct_easy = 0, correct_hard = 0;
    for (const Interaction& z : d.interactions) {
      if (z.item_id == easiest) correct_easy += z.correct;
      if (z.item_id == hardest) correct_hard += z.correct;
    }
    CHECK(correct_easy > correct_hard);
  }

  TEST_CASE("generate_synthetic fill_fraction thins the matrix") {
    SynthConfig cfg;
    cfg.fill_fraction = 0.4;
    auto [d, truth] = generate_synthetic(100, 30, cfg, 42);
    const double fill = static_cast<double>(d.interactions.size()) / (100.0 * 30.0);
    CHECK(fill > 0.3);
    CHECK(fill < 0.5);
  }

  TEST_CASE("split_roles assigns exact counts and drops the remainder") {
    auto [d, truth] = generate_synthetic(20, 5, SynthConfig{}, 3);
    const ResponseDataset s = split_roles(d, RoleCounts{8, 3, 4, 2}, 3);
    CHECK(s.users_with_role(Role::UnbiasedTrain).size() == 8);
    CHECK(s.users_with_role(Role::UnbiasedVal).size() == 3);
    CHECK(s.users_with_role(Role::Biased).size() == 4);
    CHECK(s.users_with_role(Role::Test).size() == 2);
    CHECK(s.user_roles.size() == 17);           // 3 users dropped entirely
    CHECK(s.interactions.size() == 17u * 5u);   // their rows go with them

    // Deterministic in the seed; different seed moves users around.
    const ResponseDataset s2 = split_roles(d, RoleCounts{8, 3, 4, 2}, 3);
    CHECK(s2.users_with_role(Role::Biased) == s.users_with_role(Role::Biased));
    const ResponseDataset s3 = split_roles(d, RoleCounts{8, 3, 4, 2}, 4);
    CHECK(s3.users_with_role(Role::Biased) != s.users_with_role(Role::Biased));

    CHECK_THROWS_AS(split_roles(d, RoleCounts{18, 1, 1, 1}, 3), DataError);
    CHECK_THROWS_AS(split_roles(d, RoleCounts{-1, 0, 0, 0}, 3), std::invalid_argument);
  }

  TEST_CASE("truth json round-trips") {
    TempDir tmp;
    auto [d, truth] = generate_synthetic(9, 6, SynthConfig{}, 55);
    const std::string p = tmp.file("truth.json");
    save_truth_json(truth, p);
    const SyntheticTruth back = load_truth_json(p);
    CHECK(back.items.size() == truth.items.size());
    CHECK(back.thetas.size() == truth.thetas.size());
    for (const auto& [id, it] : truth.items) {
      CHECK(back.items.at(id).a == doctest::Approx(it.a).epsilon(1e-15));
      CHECK(back.items.at(id).b == doctest::Approx(it.b).epsilon(1e-15));
    }
    for (const auto& [uid, th] : truth.thetas)
      CHECK(back.thetas.at(uid) == doctest::Approx(th).epsilon(1e-15));
    CHECK(back.seed == truth.seed);
    CHECK_THROWS_AS(load_truth_json(tmp.file("missing.json")), DataError);
  }
}
