#include <doctest.h>

#include <cmath>
#include <limits>

#include "poselift/report.hpp"

using namespace poselift;

TEST_SUITE("report") {

TEST_CASE("config hash is FNV-1a 64") {
  CHECK(config_hash("") == "cbf29ce484222325");
  CHECK(config_hash("a") == "af63dc4c8601ec8c");
  CHECK(config_hash("foobar") == "85944171f73967e8");
  CHECK(report_filename("ablation", "00ff", 3, "csv") == "ablation_00ff_seed3.csv");
}

TEST_CASE("training log table") {
  TrainingLog log;
  log.initial = EpochRecord{0, 2.5, 300.0, 310.0, 1e-3, false};
  log.epochs.push_back({1, 1.25, 150.5, 140.0, 1e-3, false});
  const std::string csv = training_log_csv(log, "abc");
  CHECK(csv ==
        "# poselift training-log config=abc\n"
        "epoch,train_loss,val_mpjpe,train_mpjpe,lr,diverged\n"
        "0,2.5,300,310,0.001,0\n"
        "1,1.25,150.5,140,0.001,0\n");
  CHECK(training_log_csv(TrainingLog{}, "abc").find("\n0,") == std::string::npos);
}

TEST_CASE("ablation tables") {
  AblationReport r;
  r.blocks = 1;
  r.width = 128;
  r.seed = 2;
  for (int i = 0; i < 8; ++i) {
    r.rows.push_back({(i & 4) != 0, (i & 2) != 0, (i & 1) != 0, 40.0 + i, false, 10});
  }
  r.rows[4].diverged = true;
  r.rows[4].val_mpjpe = std::numeric_limits<double>::quiet_NaN();
  const std::string csv = ablation_csv(r, "h");
  CHECK(csv.rfind("# poselift ablation config=h mpjpe_joints=all_joints\n", 0) == 0);
  CHECK(csv.find("0,0,1,41,0,10\n") != std::string::npos);
  CHECK(csv.find("1,0,0,nan,1,10\n") != std::string::npos);
  const std::string text = ablation_text(r);
  CHECK(text.find("diverged") != std::string::npos);
  CHECK(text.find("47.00") != std::string::npos);
}

TEST_CASE("sweep tables") {
  SweepReport s;
  s.cells = {{1, 64, 50.0, false}, {1, 128, 45.5, false}};
  const std::string csv = sweep_csv(s, "h");
  CHECK(csv.find("blocks,width,val_mpjpe,diverged\n1,64,50,0\n1,128,45.5,0\n") !=
        std::string::npos);
  CHECK(sweep_text(s).find("45.50") != std::string::npos);
}

}
