#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "binsr/dataset.hpp"
#include "binsr/image.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const fs::path log = testutil::temp_dir("cli_log") / "out.txt";
  const std::string cmd = std::string(BINSR_EXE) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

}  // namespace

TEST_CASE("cli: usage and configuration errors exit 2") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("--help").code == 0);
  const Run bad = run("analyze --block Sideways");
  CHECK(bad.code == 2);
  CHECK(bad.out.find("Sideways") != std::string::npos);
  CHECK(run("analyze --cutoff 99").code == 2);
  CHECK(run("bench-packed --c 0").code == 2);
}

TEST_CASE("cli: analyze prints the flow report") {
  const Run r = run("analyze --block BiReal --tail Lightweight");
  CHECK(r.code == 0);
  CHECK(r.out.find("FP path: yes") != std::string::npos);
  const Run o = run("analyze --tail Original");
  CHECK(o.code == 0);
  CHECK(o.out.find("FP path: no") != std::string::npos);
}

TEST_CASE("cli: data errors exit 3") {
  CHECK(run("eval --ckpt /nonexistent/model.e2fc").code == 3);
  CHECK(run("prepare --hr /nonexistent/hr --out /tmp/binsr_x --scale 2").code == 3);
}

TEST_CASE("cli: prepare, train, eval and infer") {
  const fs::path dir = testutil::temp_dir("cli_flow");
  fs::create_directories(dir / "hr");
  std::mt19937_64 rng(3);
  binsr::write_png(dir / "hr/a.png", binsr::synthetic_image(40, 36, rng));
  binsr::write_png(dir / "hr/b.png", binsr::synthetic_image(34, 34, rng));
  std::ofstream(dir / "hr/broken.png") << "junk";

  const Run prep = run("prepare --hr " + (dir / "hr").string() + " --out " + (dir / "data").string() + " --scale 2");
  CHECK(prep.code == 0);
  CHECK(prep.out.find("2 pairs") != std::string::npos);
  CHECK(prep.out.find("warning") != std::string::npos);
  const fs::path manifest = dir / "data" / "manifest_x2.txt";
  REQUIRE(fs::exists(manifest));

  const std::string small = " --blocks 1 --channels 8 --epochs 1 --iters 2 --batch 2 --patch 8";
  const Run tr = run("train --data " + manifest.string() + " --val " + manifest.string() + small + " --out " +
                     (dir / "run").string());
  CHECK(tr.code == 0);
  REQUIRE(fs::exists(dir / "run" / "model.e2fc"));
  CHECK(fs::exists(dir / "run" / "train.log"));

  const std::string ckpt = (dir / "run" / "model.e2fc").string();
  const Run ev = run("eval --ckpt " + ckpt + " --data " + manifest.string() + " --csv " + (dir / "m.csv").string());
  CHECK(ev.code == 0);
  CHECK(fs::exists(dir / "m.csv"));

  const Run inf = run("infer --ckpt " + ckpt + " --lr " + (dir / "data" / "lr_x2" / "a.png").string() + " --out " +
                      (dir / "sr.png").string());
  CHECK(inf.code == 0);
  CHECK(binsr::read_png(dir / "sr.png").width == 40);
  CHECK(run("infer --ckpt " + ckpt + " --lr " + (dir / "hr/broken.png").string() + " --out " +
            (dir / "x.png").string())
            .code == 3);
}

TEST_CASE("cli: a diverging run exits 4") {
  const fs::path dir = testutil::temp_dir("cli_diverge");
  const Run r = run("train --blocks 1 --channels 8 --epochs 1 --iters 20 --batch 2 --patch 8 --lr 1e38 --out " +
                    dir.string());
  CHECK(r.code == 4);
  CHECK(r.out.find("non-finite") != std::string::npos);
}
