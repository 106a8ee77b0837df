#pragma once

#include "botwatch/cluster.hpp"
#include "botwatch/correlate.hpp"
#include "botwatch/filter.hpp"
#include "botwatch/flowgen.hpp"
#include "botwatch/hierarchical.hpp"
#include "botwatch/ingest.hpp"
#include "botwatch/model.hpp"
#include "botwatch/ncd.hpp"
#include "botwatch/pipeline.hpp"
#include "botwatch/report.hpp"
#include "botwatch/scandetect.hpp"
#include "botwatch/sim.hpp"
#include "botwatch/xmeans.hpp"
