// The 20x20 demo map the console opens with; fully editable in the UI.
export const DEFAULT_MAP = {
  width: 20,
  height: 20,
  start_x: 0,
  start_y: 0,
  end_x: 19,
  end_y: 19,
  obstacle_list: [
    { label: 'school', x1: 6, y1: 9, x2: 8, y2: 11, kind: 'static' },
    { label: 'office building', x1: 15, y1: 10, x2: 17, y2: 12, kind: 'static' },
    { label: 'park', x1: 0, y1: 17, x2: 1, y2: 19, kind: 'static' },
  ],
};

export const DEFAULT_MAP_JSON = JSON.stringify(DEFAULT_MAP, null, 2);
