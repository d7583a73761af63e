#pragma once

#include "bagging/config.hpp"
#include "bagging/dataset.hpp"
#include "bagging/ensemble.hpp"
#include "bagging/error.hpp"
#include "bagging/experiment.hpp"
#include "bagging/metrics.hpp"
#include "bagging/parallel.hpp"
#include "bagging/predictor.hpp"
#include "bagging/prune.hpp"
#include "bagging/report.hpp"
#include "bagging/resample.hpp"
#include "bagging/rng.hpp"
#include "bagging/synthetic.hpp"
#include "bagging/task.hpp"
