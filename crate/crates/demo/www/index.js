import init, { distance, mallows_pmf, simulate_and_fit } from "./pkg/partial_mallows_demo.js";

const $ = (id) => document.getElementById(id);
const fmt = (x, d = 4) => Number(x).toFixed(d);
const stages = (v) => "[" + v.join(", ") + "]";

function guarded(out, fn) {
  try {
    fn();
  } catch (e) {
    out.innerHTML = `<p class="error">${e.message ?? e}</p>`;
  }
}

function renderDistance() {
  const p = Number($("dist-p").value);
  $("dist-p-value").textContent = p.toFixed(2);
  guarded($("dist-out"), () => {
    const r = JSON.parse(distance($("dist-a").value, $("dist-b").value, p));
    const rows = r.pairs
      .map((q) => `<tr><td>(${q.i + 1}, ${q.j + 1})</td><td>${q.class}</td><td>${q.contribution}</td></tr>`)
      .join("");
    $("dist-out").innerHTML =
      `<p><b>distance = ${r.distance}</b>: ${r.discordant} discordant, ${r.tied_one} tied in one,
       ${r.tied_both} tied in both, ${r.concordant} concordant, ${r.dropped} dropped</p>
       <table><tr><th>pair</th><th>class</th><th>adds</th></tr>${rows}</table>`;
  });
}

function renderPmf() {
  const lambda = Math.pow(10, Number($("pmf-lambda").value));
  $("pmf-lambda-value").textContent = lambda.toPrecision(3);
  guarded($("pmf-out"), () => {
    const r = JSON.parse(
      mallows_pmf($("pmf-center").value, Number($("pmf-l").value), lambda, 0.5, 10, 8, 7),
    );
    const top = r.top
      .map((x) => `<tr><td class="mono">${stages(x.stages)}</td><td>${x.distance}</td><td>${fmt(x.probability)}</td></tr>`)
      .join("");
    const maxMass = Math.max(...r.by_distance.map((d) => d.mass));
    const hist = r.by_distance
      .map(
        (d) => `<tr><td>${d.distance}</td><td>${d.rankings}</td><td>${fmt(d.mass)}</td>
          <td style="text-align:left"><span class="bar" style="width:${(200 * d.mass) / maxMass}px"></span></td></tr>`,
      )
      .join("");
    $("pmf-out").innerHTML =
      `<p>${r.space_size} rankings; log partition function ${fmt(r.log_partition)}; mass on the center ${fmt(r.modal_mass)}</p>
       <div style="display:flex; gap:2em; flex-wrap:wrap">
         <table><tr><th>most likely</th><th>distance</th><th>probability</th></tr>${top}</table>
         <table><tr><th>distance</th><th>#rankings</th><th>mass</th><th></th></tr>${hist}</table>
       </div>
       <p>Exact draws: <span class="mono">${r.samples.map(stages).join(" ")}</span></p>`;
  });
}

function renderFit() {
  $("fit-out").innerHTML = "<p>fitting...</p>";
  // Let the message paint before the (synchronous) chain runs.
  setTimeout(() =>
    guarded($("fit-out"), () => {
      const iterations = Number($("fit-iter").value);
      const r = JSON.parse(
        simulate_and_fit(
          $("fit-center").value,
          Number($("fit-l").value),
          Number($("fit-lambda").value),
          Number($("fit-m").value),
          Number($("fit-missing").value),
          iterations,
          Math.floor(iterations / 3),
          Number($("fit-seed").value),
        ),
      );
      $("fit-out").innerHTML =
        `<p>truth <span class="mono">${stages(r.truth)}</span>, MAP <span class="mono">${stages(r.center_map)}</span>
         (distance ${r.distance_to_truth}); &lambda;<sub>MAP</sub> = ${fmt(r.lambda_map, 3)};
         ${r.censored} respondents censored; prior center <span class="mono">${stages(r.prior_center)}</span>;
         acceptance: center ${fmt(r.center_acceptance, 3)}, &lambda; ${fmt(r.lambda_acceptance, 3)}</p>
         ${r.svg.replace(/^<\?xml[^>]*>\s*/, "")}`;
    }),
  );
}

await init();
for (const id of ["dist-a", "dist-b", "dist-p"]) $(id).addEventListener("input", renderDistance);
for (const id of ["pmf-center", "pmf-l", "pmf-lambda"]) $(id).addEventListener("input", renderPmf);
$("fit-run").addEventListener("click", renderFit);
renderDistance();
renderPmf();
