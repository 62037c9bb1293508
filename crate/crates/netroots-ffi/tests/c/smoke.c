#include <math.h>
#include <stdio.h>
#include <string.h>

#include "netroots.h"

int main(void) {
    /* star centred on 0 plus one noise edge */
    uint32_t edges[] = {0, 1, 0, 2, 0, 3, 0, 4, 1, 2};
    NrGraph *g = NULL;
    if (nr_graph_from_edges(5, edges, 5, &g) != NR_STATUS_OK) return 1;

    NrParams p = nr_params_default(NR_VARIANT_SINGLE_ROOT);
    NrChainOptions o = nr_chain_options_default();
    o.seed = 7;
    NrResult *r = NULL;
    if (nr_infer(g, &p, &o, &r) != NR_STATUS_OK) return 2;

    double probs[5];
    if (nr_result_root_probs(r, probs, 5) != NR_STATUS_OK) return 3;
    double total = 0;
    for (int i = 0; i < 5; i++) total += probs[i];
    if (fabs(total - 1.0) > 1e-9) return 4;

    size_t set[5], len = 0;
    if (nr_result_credible_set(r, 0.2, 1, set, 5, &len) != NR_STATUS_OK || len == 0) return 5;
    if (set[0] != 0) return 6;

    /* errors come back as codes with a message */
    p.alpha = -1;
    NrResult *bad = NULL;
    if (nr_infer(g, &p, &o, &bad) != NR_STATUS_INVALID_ARGUMENT || bad != NULL) return 7;
    if (nr_last_error() == NULL || strlen(nr_last_error()) == 0) return 8;

    nr_result_free(r);
    nr_graph_free(g);
    printf("ok %s\n", nr_version());
    return 0;
}
