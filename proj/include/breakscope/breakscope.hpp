#pragma once

#include "breakscope/beast.hpp"
#include "breakscope/date.hpp"
#include "breakscope/error.hpp"
#include "breakscope/events.hpp"
#include "breakscope/hurst.hpp"
#include "breakscope/infotheory.hpp"
#include "breakscope/io.hpp"
#include "breakscope/knn.hpp"
#include "breakscope/pmime.hpp"
#include "breakscope/preprocess.hpp"
#include "breakscope/report.hpp"
#include "breakscope/series.hpp"
#include "breakscope/stats.hpp"
#include "breakscope/synth.hpp"
