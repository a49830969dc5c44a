// Integration driver for the mop CLI. Usage: cli_driver <mop-binary> <work-dir>.
// Generates a small synthetic dataset, runs every command end to end, and
// checks exit codes, output files, and rerun determinism.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mop/image.hpp"
#include "mop/model_io.hpp"
#include "mop/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& what) {
  if (!ok) {
    ++g_failures;
    std::cout << "[FAIL] " << what << "\n";
  } else {
    std::cout << "[ok]   " << what << "\n";
  }
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

int run(const std::string& cmd) {
  int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  if (status == -1) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string field;
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

// Striped or checkered 64x64 texture with a random phase and pixel jitter.
mop::ImageTensor texture(int cls, mop::SplitMix64& rng) {
  mop::ImageTensor img(64, 64, 1);
  int px = static_cast<int>(rng.uniform_index(16));
  int py = static_cast<int>(rng.uniform_index(16));
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      bool on = cls == 0 ? (((x + px) / 8) % 2 == 0)
                         : ((((x + px) / 8) + ((y + py) / 8)) % 2 == 0);
      int jitter = static_cast<int>(rng.uniform_index(41)) - 20;
      int v = (on ? 215 : 40) + jitter;
      img.at(x, y, 0) = static_cast<std::uint8_t>(std::max(0, std::min(255, v)));
    }
  return img;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: cli_driver <mop-binary> <work-dir>\n";
    return 2;
  }
  const std::string mop_bin = fs::absolute(argv[1]).string();
  const fs::path work = fs::absolute(argv[2]);
  fs::remove_all(work);
  fs::create_directories(work / "train");
  fs::create_directories(work / "test");

  // --- dataset ---------------------------------------------------------
  mop::SplitMix64 rng(4321);
  json labels;
  for (int i = 0; i < 36; ++i) {
    int cls = i % 2;
    char name[32];
    std::snprintf(name, sizeof name, "tr_%02d", i);
    mop::write_pnm(texture(cls, rng), (work / "train" / (std::string(name) + ".pgm")).string());
    labels[name] = cls == 0 ? "stripes" : "checker";
  }
  for (int i = 0; i < 10; ++i) {
    int cls = i % 2;
    char name[32];
    std::snprintf(name, sizeof name, "te_%02d", i);
    mop::write_pnm(texture(cls, rng), (work / "test" / (std::string(name) + ".pgm")).string());
    labels[name] = cls == 0 ? "stripes" : "checker";
  }
  std::ofstream(work / "labels.json") << labels.dump(2);

  json config{{"images_dir", (work / "train").string()},
              {"labels", (work / "labels.json").string()},
              {"grid", {{"frame", 64}, {"level_sides", {64, 32, 16}}, {"stride", 16}}},
              {"method", "vlad"},
              {"strategy", {{"mode", "concatenation"}, {"levels", {1, 2, 3}}}},
              {"patch_pca_dim", 16},
              {"pooled_pca_dim", 32},
              {"kmeans_k", 8},
              {"toy", {{"out_dim", 64}}},
              {"seed", 42},
              {"sweep",
               {{"scale", {1.0, 1.5}}, {"translate", {0.0}}, {"rotate", {0.0, 5.0}},
                {"flip", true}}},
              {"window_sides", {48, 32}},
              {"window_stride", 16}};
  const std::string cfg_path = (work / "config.json").string();
  std::ofstream(cfg_path) << config.dump(2);

  json bad_grid = config;
  bad_grid["grid"]["stride"] = 32;
  std::ofstream(work / "config_badgrid.json") << bad_grid.dump(2);

  json no_labels = config;
  no_labels.erase("labels");
  std::ofstream(work / "config_nolabels.json") << no_labels.dump(2);

  json unknown_key = config;
  unknown_key["bogus_key"] = 1;
  std::ofstream(work / "config_unknown.json") << unknown_key.dump(2);

  const std::string out = (work / "out").string();
  const std::string out2 = (work / "out_rerun").string();
  const std::string outb = (work / "out_b").string();
  auto base = [&](const std::string& extra) {
    return quote(mop_bin) + " --config " + quote(cfg_path) + " " + extra;
  };

  // --- fit --------------------------------------------------------------
  check(run(base("--out " + quote(out) + " fit")) == 0, "fit exits 0");
  check(fs::exists(out + "/model.mopm"), "fit writes model.mopm");
  check(fs::exists(out + "/fit_report.json"), "fit writes fit_report.json");
  check(run(base("--out " + quote(out2) + " fit")) == 0, "fit rerun exits 0");
  check(slurp(out + "/model.mopm") == slurp(out2 + "/model.mopm"),
        "fit rerun reproduces model.mopm byte for byte");

  // --- encode -----------------------------------------------------------
  const std::string model_arg = " encode --model " + quote(out + "/model.mopm");
  check(run(base("--out " + quote(out) + model_arg + " --prefix train")) == 0, "encode exits 0");
  check(run(base("--out " + quote(out2) + model_arg + " --prefix train")) == 0,
        "encode rerun exits 0");
  check(slurp(out + "/train.mopd") == slurp(out2 + "/train.mopd"),
        "encode rerun reproduces train.mopd byte for byte");

  mop::FeatureSet train = mop::load_feature_set(out + "/train.mopd", out + "/train.json");
  check(train.features.rows == 36, "train features: 36 rows");
  check(train.features.cols == 128, "train features: 128 dims (64 global + 2x32 pooled)");
  bool layout_ok = train.layout.size() == 3 && train.layout[0].block == "level1" &&
                   train.layout[0].offset == 0 && train.layout[0].length == 64 &&
                   train.layout[1].block == "level2" && train.layout[1].offset == 64 &&
                   train.layout[1].length == 32 && train.layout[2].block == "level3" &&
                   train.layout[2].offset == 96 && train.layout[2].length == 32;
  check(layout_ok, "train features: block layout level1/level2/level3 = 64/32/32");

  check(run(base("--out " + quote(out) + model_arg + " --prefix test --images " +
                 quote((work / "test").string()))) == 0,
        "encode of the test split exits 0");
  mop::FeatureSet test = mop::load_feature_set(out + "/test.mopd", out + "/test.json");
  check(test.features.rows == 10, "test features: 10 rows");
  check(run(base("--out " + quote(out) + " --threads 2" + model_arg + " --prefix train")) == 0,
        "--threads 2 is accepted");

  // --- classify ---------------------------------------------------------
  check(run(base("--out " + quote(out) + " classify --model " + quote(out + "/model.mopm") +
                 " --train " + quote(out + "/train") + " --test " + quote(out + "/test"))) == 0,
        "classify exits 0");
  check(fs::exists(out + "/svm.mopm"), "classify writes svm.mopm");
  std::vector<std::string> cls_lines = lines_of(slurp(out + "/classify.csv"));
  check(cls_lines.size() == 3, "classify.csv has a header and two split rows");
  if (cls_lines.size() == 3) {
    std::vector<std::string> row = fields_of(cls_lines[1]);
    bool shape_ok = row.size() == 7 && row[0] == "vlad" && row[1] == "concatenation" &&
                    row[2] == "1+2+3" && row[3] == "train";
    check(shape_ok, "classify.csv train row carries method/mode/levels/split");
    double train_acc = shape_ok ? std::stod(row[4]) : 0.0;
    check(train_acc >= 0.9, "train accuracy is sane (features align with labels)");
  }

  // --- retrieve ---------------------------------------------------------
  check(run(base("--out " + quote(out) + " retrieve --db " + quote(out + "/train") +
                 " --queries " + quote(out + "/test"))) == 0,
        "retrieve exits 0");
  std::vector<std::string> ret_lines = lines_of(slurp(out + "/retrieval.csv"));
  check(ret_lines.size() == 12, "retrieval.csv has header + 10 queries + mAP row");
  if (ret_lines.size() == 12) {
    std::vector<std::string> map_row = fields_of(ret_lines.back());
    bool shape_ok = map_row.size() == 3 && map_row[0] == "raw" && map_row[1] == "mAP";
    check(shape_ok, "retrieval.csv ends with the raw mAP row");
    double map_val = shape_ok ? std::stod(map_row[2]) : -1.0;
    check(map_val >= 0.5 && map_val <= 1.0, "mAP is sane (ids align with features)");
  }

  // --- invariance -------------------------------------------------------
  check(run(base("--out " + quote(out) + " invariance --model " + quote(out + "/model.mopm") +
                 " --svm " + quote(out + "/svm.mopm") + " --images " +
                 quote((work / "test").string()))) == 0,
        "invariance exits 0");
  std::vector<std::string> inv_lines = lines_of(slurp(out + "/invariance.csv"));
  check(inv_lines.size() == 8, "invariance.csv has one row per configured transform");
  if (inv_lines.size() == 8) {
    std::vector<std::string> identity_accs;
    for (std::size_t i = 1; i < inv_lines.size(); ++i) {
      std::vector<std::string> row = fields_of(inv_lines[i]);
      if (row.size() == 5 && std::stod(row[1]) == 0.0 && row[0] != "flip")
        identity_accs.push_back(row[2]);
      if (row.size() == 5 && row[0] == "scale" && std::stod(row[1]) == 1.0)
        identity_accs.push_back(row[2]);
    }
    bool all_equal = identity_accs.size() == 4;
    for (const std::string& a : identity_accs) all_equal = all_equal && a == identity_accs[0];
    check(all_equal, "identity transform rows share the baseline accuracy");
  }

  // --- windows ----------------------------------------------------------
  check(run(base("--out " + quote(out) + " windows --model " + quote(out + "/model.mopm") +
                 " --svm " + quote(out + "/svm.mopm") + " --image " +
                 quote((work / "test" / "te_00.pgm").string()) + " --class stripes")) == 0,
        "windows exits 0");
  std::vector<std::string> win_lines = lines_of(slurp(out + "/windows.csv"));
  check(win_lines.size() == 2, "windows.csv has a single result row");
  if (win_lines.size() == 2) {
    std::vector<std::string> row = fields_of(win_lines[1]);
    check(row.size() == 7 && row[6] == "13", "13 windows scored for sides {48,32} stride 16");
    check(row.size() == 7 && (row[4] == "48" || row[4] == "32"), "best window side is valid");
  }

  // --- failure modes ----------------------------------------------------
  check(run(quote(mop_bin) + " --config " + quote((work / "missing.json").string()) + " fit") == 2,
        "missing config file exits 2");
  check(run(quote(mop_bin) + " --config " + quote((work / "config_unknown.json").string()) +
            " --out " + quote(out) + " fit") == 2,
        "unknown config key exits 2");
  check(run(quote(mop_bin) + " --config " + quote((work / "config_nolabels.json").string()) +
            " --out " + quote(out) + " retrieve --db " + quote(out + "/train") + " --queries " +
            quote(out + "/test")) == 2,
        "retrieve without labels or relevance exits 2");
  check(run(quote(mop_bin) + " --config " + quote((work / "config_badgrid.json").string()) +
            " --out " + quote(out) + model_arg + " --prefix x") == 3,
        "encode with a config that contradicts the model exits 3");

  // Features produced under a different seed carry a different fingerprint.
  check(run(base("--seed 43 --out " + quote(outb) + " fit")) == 0, "fit with --seed 43 exits 0");
  check(run(base("--out " + quote(outb) + " encode --model " + quote(outb + "/model.mopm") +
                 " --prefix test --images " + quote((work / "test").string()))) == 0,
        "encode against the seed-43 model exits 0");
  check(run(base("--out " + quote(outb) + " classify --model " + quote(out + "/model.mopm") +
                 " --train " + quote(out + "/train") + " --test " + quote(outb + "/test"))) == 3,
        "classify with mismatched feature fingerprints exits 3");

  check(run(base("--out " + quote(out) + " windows --model " + quote(out + "/model.mopm") +
                 " --svm " + quote(out + "/svm.mopm") + " --image " +
                 quote((work / "test" / "te_00.pgm").string()) + " --class nosuch")) == 2,
        "windows with an unknown class exits 2");

  if (g_failures == 0) {
    std::cout << "cli integration: all checks passed\n";
    return 0;
  }
  std::cout << "cli integration: " << g_failures << " checks failed\n";
  return 1;
}
