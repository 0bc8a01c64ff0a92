from fdisac.runner import main

raise SystemExit(main())
