from ragbench.cli import main

raise SystemExit(main())
