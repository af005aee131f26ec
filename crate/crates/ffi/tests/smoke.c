#include <stdio.h>
#include <string.h>
#include "sae.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (%s)\n", #cond, sae_last_error()); return 1; } } while (0)

int main(void) {
    SaeScenario *s = NULL;
    CHECK(sae_scenario_builtin("nope", &s) == SAE_STATUS_UNKNOWN_SCENARIO);
    CHECK(strstr(sae_last_error(), "nope") != NULL);

    CHECK(sae_scenario_builtin("reflection", &s) == SAE_STATUS_OK);
    CHECK(sae_scenario_set_mode(s, "spec2020") == SAE_STATUS_OK);
    SaeReport *r = NULL;
    CHECK(sae_run(s, &r) == SAE_STATUS_OK);
    bool holds = false;
    CHECK(sae_report_holds(r, &holds) == SAE_STATUS_OK && holds);
    char *trace = NULL;
    CHECK(sae_report_trace_jsonl(r, &trace) == SAE_STATUS_OK);
    CHECK(strstr(trace, "Accepted") != NULL);
    sae_string_free(trace);
    sae_report_free(r);

    SaeExploration *e = NULL;
    CHECK(sae_explore(s, "progress", 1, 10, 0, &e) == SAE_STATUS_OK);
    SaeVerdict v = SAE_VERDICT_PASS;
    CHECK(sae_exploration_verdict(e, 0, &v) == SAE_STATUS_OK && v == SAE_VERDICT_FAIL);
    sae_exploration_free(e);
    sae_scenario_free(s);
    printf("ok %s\n", sae_version());
    return 0;
}
