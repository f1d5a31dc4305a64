import { ApiClient } from './api';
import { DEFAULT_MAP_JSON } from './defaultmap';
import { buildGrid } from './gridmodel';
import type { Interpreter, MissionState } from './types';
import { ConsoleViewModel } from './viewmodel';

const POLL_WAIT_SECONDS = 20; // server long-poll window per cycle

const baseUrl = (window as { DRONENAV_BASE_URL?: string }).DRONENAV_BASE_URL
  ?? window.location.origin;
const api = new ApiClient(baseUrl);
const vm = new ConsoleViewModel(api);

const app = document.querySelector<HTMLDivElement>('#app');
if (!app) throw new Error('missing #app container');
app.innerHTML = buildShell();

const mapInput = byId<HTMLTextAreaElement>('mapInput');
mapInput.value = DEFAULT_MAP_JSON;

byId<HTMLButtonElement>('btnLoad').addEventListener('click', () => {
  void vm.loadMap(mapInput.value).then(() => startPolling());
});
byId<HTMLButtonElement>('btnStep').addEventListener('click', () => {
  void vm.step();
});
byId<HTMLButtonElement>('btnSend').addEventListener('click', () => {
  void submitUtterance();
});
byId<HTMLInputElement>('utterance').addEventListener('keydown', (event) => {
  if (event.key === 'Enter') void submitUtterance();
});
for (const value of ['deterministic', 'llm'] as Interpreter[]) {
  byId<HTMLInputElement>(`interp-${value}`).addEventListener('change', () => {
    vm.setInterpreter(value);
  });
}

vm.onChange = render;
render();

async function submitUtterance(): Promise<void> {
  const input = byId<HTMLInputElement>('utterance');
  const ok = await vm.submitUtterance(input.value);
  if (ok) input.value = '';
}

let polling = false;
function startPolling(): void {
  if (polling) return;
  polling = true;
  void loop();
  async function loop(): Promise<void> {
    for (;;) {
      if (!vm.snapshot().mission) {
        await sleep(300); // nothing to watch yet
        continue;
      }
      await vm.pollOnce(POLL_WAIT_SECONDS);
      const delay = vm.backoffDelayMs();
      if (delay > 0) await sleep(delay);
    }
  }
}

function render(): void {
  const snap = vm.snapshot();

  const banner = byId<HTMLDivElement>('banner');
  banner.textContent = snap.banner ?? '';
  banner.classList.toggle('hidden', snap.banner === null);

  const chip = byId<HTMLSpanElement>('phaseChip');
  chip.textContent = snap.mission?.phase ?? 'no mission';
  chip.className = `chip phase-${snap.mission?.phase ?? 'none'}`;

  byId<HTMLButtonElement>('btnStep').disabled =
    snap.busy || !snap.mission || snap.mission.phase === 'landed'
    || snap.mission.phase === 'aborted';
  byId<HTMLButtonElement>('btnSend').disabled = snap.busy || !snap.mission;
  byId<HTMLButtonElement>('btnLoad').disabled = snap.busy;

  renderGrid(snap.mission);
  renderSummary(snap.mission);
  renderCommandLog(snap.mission);
  renderEvents(snap.events.slice(-12).reverse());
}

function renderGrid(mission: MissionState | null): void {
  const host = byId<HTMLDivElement>('grid');
  if (!mission) {
    host.innerHTML = '<p class="empty">Load a map to begin.</p>';
    return;
  }
  const rows = buildGrid(mission);
  host.style.gridTemplateColumns = `repeat(${mission.map.width}, 1fr)`;
  const cells: string[] = [];
  for (const row of rows) {
    for (const cell of row) {
      const classes = ['cell', ...cell.classes].join(' ');
      const title = Number.isFinite(cell.cost)
        ? `(${cell.x}, ${cell.y}) cost ${cell.cost}`
        : `(${cell.x}, ${cell.y}) blocked`;
      cells.push(`<div class="${classes}" title="${title}">${cell.glyph}</div>`);
    }
  }
  host.innerHTML = cells.join('');
}

function renderSummary(mission: MissionState | null): void {
  const host = byId<HTMLDivElement>('summary');
  if (!mission) {
    host.textContent = '';
    return;
  }
  const { remaining_path: path, current_cell: cell } = mission;
  host.innerHTML = [
    `<span>drone at (${cell.x}, ${cell.y})</span>`,
    `<span>remaining cost ${path.total_cost}</span>`,
    `<span>${path.waypoints.length} waypoints left</span>`,
    `<span>${mission.zones.length} zones</span>`,
  ].join(' · ');
}

function renderCommandLog(mission: MissionState | null): void {
  const host = byId<HTMLOListElement>('commandLog');
  if (!mission || mission.command_log.length === 0) {
    host.innerHTML = '<li class="empty">No commands issued yet.</li>';
    return;
  }
  host.innerHTML = mission.command_log
    .map((line) => `<li>${line}</li>`)
    .join('');
}

function renderEvents(events: ReturnType<ConsoleViewModel['snapshot']>['events']): void {
  const host = byId<HTMLUListElement>('eventFeed');
  if (events.length === 0) {
    host.innerHTML = '<li class="empty">Events appear here.</li>';
    return;
  }
  host.innerHTML = events
    .map((e) => `<li><span class="seq">#${e.seq}</span> ${e.kind}</li>`)
    .join('');
}

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

function buildShell(): string {
  return `
<header class="top">
  <h1>dronenav console</h1>
  <span id="phaseChip" class="chip phase-none">no mission</span>
</header>
<div id="banner" class="banner hidden"></div>
<main class="layout">
  <aside class="panel controls">
    <h2>Map</h2>
    <textarea id="mapInput" rows="12" spellcheck="false"></textarea>
    <button id="btnLoad" class="primary">Load map &amp; plan</button>

    <h2>Flight</h2>
    <button id="btnStep">Step</button>
    <div id="summary" class="summary"></div>

    <h2>Situational context</h2>
    <input id="utterance" type="text"
      placeholder="avoid within 2 squares of school" />
    <button id="btnSend">Send</button>
    <fieldset class="interp">
      <legend>Interpreter</legend>
      <label><input type="radio" name="interp" id="interp-deterministic"
        checked /> deterministic (offline)</label>
      <label><input type="radio" name="interp" id="interp-llm" /> llm</label>
    </fieldset>
  </aside>

  <section class="panel gridwrap">
    <div id="grid" class="grid"></div>
  </section>

  <aside class="panel side">
    <h2>Command log</h2>
    <ol id="commandLog" class="commands"></ol>
    <h2>Events</h2>
    <ul id="eventFeed" class="events"></ul>
  </aside>
</main>`;
}
