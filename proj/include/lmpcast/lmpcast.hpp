#pragma once

// Everything at once, for tools and quick experiments.
#include "lmpcast/autodiff/gradcheck.hpp"
#include "lmpcast/autodiff/ops.hpp"
#include "lmpcast/eval/metrics.hpp"
#include "lmpcast/eval/reports.hpp"
#include "lmpcast/grid/case_io.hpp"
#include "lmpcast/grid/ptdf.hpp"
#include "lmpcast/grid/spectral.hpp"
#include "lmpcast/market/dataset.hpp"
#include "lmpcast/model/checkpoint.hpp"
#include "lmpcast/model/model.hpp"
#include "lmpcast/train/trainer.hpp"
