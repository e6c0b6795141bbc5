#include "poselift/report.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "poselift/dataset_io.hpp"

namespace poselift {

std::string config_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string report_filename(std::string_view stem, std::string_view hash, std::uint64_t seed,
                            std::string_view ext) {
  return std::string(stem) + "_" + std::string(hash) + "_seed" + std::to_string(seed) + "." +
         std::string(ext);
}

namespace {

const char* mark(bool on) { return on ? "yes" : "no"; }

std::string header(std::string_view kind, std::string_view hash, JointAveraging averaging) {
  return "# poselift " + std::string(kind) + " config=" + std::string(hash) +
         " mpjpe_joints=" + to_string(averaging) + "\n";
}

std::string mm_or_flag(double v, bool diverged) {
  if (diverged || !std::isfinite(v)) return "diverged";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void append_record(std::string& out, const EpochRecord& r) {
  out += std::to_string(r.epoch) + "," + format_real(r.train_loss) + "," +
         format_real(r.val_mpjpe) + "," + format_real(r.train_mpjpe) + "," +
         format_real(r.learning_rate) + "," + (r.diverged ? "1" : "0") + "\n";
}

}  // namespace

std::string training_log_csv(const TrainingLog& log, std::string_view hash) {
  std::string out = "# poselift training-log config=" + std::string(hash) + "\n";
  out += "epoch,train_loss,val_mpjpe,train_mpjpe,lr,diverged\n";
  if (log.initial) append_record(out, *log.initial);
  for (const auto& r : log.epochs) append_record(out, r);
  return out;
}

std::string ablation_csv(const AblationReport& report, std::string_view hash) {
  std::string out = header("ablation", hash, report.averaging);
  out += "maxnorm,batchnorm,residual,val_mpjpe,diverged,epochs_run\n";
  for (const auto& r : report.rows) {
    out += std::string(r.maxnorm ? "1" : "0") + "," + (r.batchnorm ? "1" : "0") + "," +
           (r.residual ? "1" : "0") + "," + format_real(r.val_mpjpe) + "," +
           (r.diverged ? "1" : "0") + "," + std::to_string(r.epochs_run) + "\n";
  }
  return out;
}

std::string ablation_text(const AblationReport& report) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "Ablation: blocks=%d width=%d seed=%llu mpjpe over %s\n",
                report.blocks, report.width, static_cast<unsigned long long>(report.seed),
                to_string(report.averaging));
  out += line;
  std::snprintf(line, sizeof line, "%-9s %-11s %-9s %14s\n", "Max-norm", "Batch-norm",
                "Residual", "Val MPJPE (mm)");
  out += line;
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%-9s %-11s %-9s %14s\n", mark(r.maxnorm),
                  mark(r.batchnorm), mark(r.residual), mm_or_flag(r.val_mpjpe, r.diverged).c_str());
    out += line;
  }
  return out;
}

std::string sweep_csv(const SweepReport& report, std::string_view hash) {
  std::string out = header("sweep", hash, report.averaging);
  out += "blocks,width,val_mpjpe,diverged\n";
  for (const auto& c : report.cells) {
    out += std::to_string(c.blocks) + "," + std::to_string(c.width) + "," +
           format_real(c.val_mpjpe) + "," + (c.diverged ? "1" : "0") + "\n";
  }
  return out;
}

std::string sweep_text(const SweepReport& report) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "Capacity sweep: seed=%llu mpjpe over %s\n",
                static_cast<unsigned long long>(report.seed), to_string(report.averaging));
  out += line;
  std::snprintf(line, sizeof line, "%7s %7s %14s\n", "Blocks", "Width", "Val MPJPE (mm)");
  out += line;
  for (const auto& c : report.cells) {
    std::snprintf(line, sizeof line, "%7d %7d %14s\n", c.blocks, c.width,
                  mm_or_flag(c.val_mpjpe, c.diverged).c_str());
    out += line;
  }
  return out;
}

}  // namespace poselift
