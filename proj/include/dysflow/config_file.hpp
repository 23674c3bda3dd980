#pragma once

// Flat INI-style configuration: one [section] per pipeline stage, key=value
// lines, "#" or ";" comments. Unknown sections or keys are errors, so typos
// cannot silently fall back to defaults.

#include <string>

#include "dysflow/baseline.hpp"
#include "dysflow/cepstra.hpp"
#include "dysflow/experiment.hpp"
#include "dysflow/sdc.hpp"
#include "dysflow/tdnn.hpp"
#include "dysflow/ztw.hpp"

namespace dysflow::configfile {

struct PipelineConfig {
    ztw::ZtwConfig ztw;
    cepstra::PerceptualConfig perceptual;
    baseline::FrameConfig frame;
    sdc::SdcConfig sdc;
    tdnn::TdnnConfig tdnn;
    tdnn::TrainConfig train;
    experiment::SplitSpec split;
};

// Overrides defaults with the document's values; throws UsageError with a
// line number for anything malformed or unknown.
PipelineConfig parse_config(const std::string& text);

PipelineConfig load_config(const std::string& path);

}  // namespace dysflow::configfile
