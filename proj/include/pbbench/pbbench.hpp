#pragma once

#include "pbbench/aggregate.hpp"
#include "pbbench/csv.hpp"
#include "pbbench/dgm.hpp"
#include "pbbench/error.hpp"
#include "pbbench/estimators.hpp"
#include "pbbench/manifest.hpp"
#include "pbbench/measures.hpp"
#include "pbbench/missingness.hpp"
#include "pbbench/nelder_mead.hpp"
#include "pbbench/parallel.hpp"
#include "pbbench/report.hpp"
#include "pbbench/rng.hpp"
#include "pbbench/semver.hpp"
#include "pbbench/sha256.hpp"
#include "pbbench/stats.hpp"
#include "pbbench/store.hpp"
