#pragma once

#include "sharecast/csv.hpp"
#include "sharecast/cv_engine.hpp"
#include "sharecast/data_ingest.hpp"
#include "sharecast/dataset.hpp"
#include "sharecast/error.hpp"
#include "sharecast/evaluation.hpp"
#include "sharecast/experiments.hpp"
#include "sharecast/folds.hpp"
#include "sharecast/lasso.hpp"
#include "sharecast/parallel.hpp"
#include "sharecast/preprocess.hpp"
#include "sharecast/random_forest.hpp"
#include "sharecast/report.hpp"
#include "sharecast/rng.hpp"
