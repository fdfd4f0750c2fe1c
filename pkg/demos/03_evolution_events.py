"""Tracking communities through scripted evolution events.

Three planted groups; then two nodes migrate and some intra edges churn;
then a node dies, another is born and one group dissolves into the rest.
"""

from labelrankt import Params, partition_agreement, run_stream, stream_from_spec

S = 30
spec = {
    "sizes": [S, S, S], "p_in": 0.5, "p_out": 0.02, "weight_range": [0.5, 1.5],
    "steps": [
        [],
        [{"kind": "migrate_node", "node": 3, "target": 1},
         {"kind": "migrate_node", "node": 4, "target": 1},
         {"kind": "delete_edges", "count": 3, "community": 1},
         {"kind": "add_edges", "count": 3, "community": 1}],
        [{"kind": "death_node", "node": S + 1},
         {"kind": "birth_node", "node": 3 * S, "community": 0, "degree": 3},
         {"kind": "dissolve_community", "community": 2}],
    ],
}
stream = stream_from_spec(spec, seed=0)
out = run_stream(stream.snapshots, Params(inflation=4, q=0.5))

for t, (r, truth) in enumerate(zip(out, stream.truths)):
    ca = r.assignment
    print(f"t={t}: {ca.count} communities (truth {truth.count}), "
          f"agreement {partition_agreement(ca, truth):.3f}, updated {r.updated_nodes} nodes")
    if t == 1:
        print("   nodes 3, 4 now with node 31's group:", ca[3] == ca[4] == ca[S + 5])
    if t == 2:
        print(f"   newborn {3 * S} joins community {ca[3 * S]} (node 0 is in {ca[0]})")
